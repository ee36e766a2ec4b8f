package org.owasp.benchmark.testcode;

public class Module087 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module087");
        sinkPathtraver(param);
    }
}
