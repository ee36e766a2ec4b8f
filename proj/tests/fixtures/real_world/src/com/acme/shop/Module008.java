package org.owasp.benchmark.testcode;

public class Module008 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module008");
        sinkCrypto(param);
    }
}
