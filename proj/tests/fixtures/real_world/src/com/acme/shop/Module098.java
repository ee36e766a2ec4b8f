package org.owasp.benchmark.testcode;

public class Module098 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module098");
        sinkPathtraver(param);
    }
}
