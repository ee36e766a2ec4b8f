package org.owasp.benchmark.testcode;

public class Module084 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module084");
        sinkSecurecookie(param);
    }
}
