package org.owasp.benchmark.testcode;

public class Module053 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module053");
        sinkWeakrand(param);
    }
}
