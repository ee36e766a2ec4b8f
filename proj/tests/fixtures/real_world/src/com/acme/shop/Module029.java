package org.owasp.benchmark.testcode;

public class Module029 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module029");
        sinkSecurecookie(param);
    }
}
