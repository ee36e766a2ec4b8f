package org.owasp.benchmark.testcode;

public class Module038 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module038");
        sinkHash(param);
    }
}
