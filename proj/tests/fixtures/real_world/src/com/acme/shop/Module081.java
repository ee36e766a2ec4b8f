package org.owasp.benchmark.testcode;

public class Module081 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module081");
        sinkSqli(param);
    }
}
