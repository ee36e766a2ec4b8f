package org.owasp.benchmark.testcode;

public class Module094 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module094");
        sinkXpathi(param);
    }
}
