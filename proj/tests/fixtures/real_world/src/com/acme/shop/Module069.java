package org.owasp.benchmark.testcode;

public class Module069 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module069");
        sinkXss(param);
    }
}
