package org.owasp.benchmark.testcode;

public class Module033 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module033");
        sinkCmdi(param);
    }
}
