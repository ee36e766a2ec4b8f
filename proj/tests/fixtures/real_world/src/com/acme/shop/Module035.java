package org.owasp.benchmark.testcode;

public class Module035 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module035");
        sinkLdapi(param);
    }
}
