package org.owasp.benchmark.testcode;

public class Module017 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module017");
        sinkXpathi(param);
    }
}
