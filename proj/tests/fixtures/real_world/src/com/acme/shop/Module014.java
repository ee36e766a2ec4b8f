package org.owasp.benchmark.testcode;

public class Module014 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module014");
        sinkXss(param);
    }
}
