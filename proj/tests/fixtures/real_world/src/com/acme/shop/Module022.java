package org.owasp.benchmark.testcode;

public class Module022 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module022");
        sinkCmdi(param);
    }
}
