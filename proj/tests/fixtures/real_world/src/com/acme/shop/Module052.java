package org.owasp.benchmark.testcode;

public class Module052 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module052");
        sinkCrypto(param);
    }
}
