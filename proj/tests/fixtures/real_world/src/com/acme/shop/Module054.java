package org.owasp.benchmark.testcode;

public class Module054 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module054");
        sinkPathtraver(param);
    }
}
