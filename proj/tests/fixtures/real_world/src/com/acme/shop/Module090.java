package org.owasp.benchmark.testcode;

public class Module090 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module090");
        sinkLdapi(param);
    }
}
