package org.owasp.benchmark.testcode;

public class Module011 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module011");
        sinkCmdi(param);
    }
}
