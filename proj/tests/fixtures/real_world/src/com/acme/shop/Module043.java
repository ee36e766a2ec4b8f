package org.owasp.benchmark.testcode;

public class Module043 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module043");
        sinkPathtraver(param);
    }
}
