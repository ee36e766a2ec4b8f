package org.owasp.benchmark.testcode;

public class Module109 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module109");
        sinkPathtraver(param);
    }
}
