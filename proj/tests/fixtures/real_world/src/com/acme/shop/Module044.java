package org.owasp.benchmark.testcode;

public class Module044 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module044");
        sinkCmdi(param);
    }
}
