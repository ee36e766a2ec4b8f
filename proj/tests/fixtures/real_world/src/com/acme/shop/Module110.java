package org.owasp.benchmark.testcode;

public class Module110 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module110");
        sinkCmdi(param);
    }
}
