package org.owasp.benchmark.testcode;

public class Module000 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module000");
        sinkCmdi(param);
    }
}
