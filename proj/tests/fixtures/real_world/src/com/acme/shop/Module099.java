package org.owasp.benchmark.testcode;

public class Module099 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module099");
        sinkCmdi(param);
    }
}
