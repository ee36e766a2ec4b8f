package org.owasp.benchmark.testcode;

public class Module026 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module026");
        sinkSqli(param);
    }
}
