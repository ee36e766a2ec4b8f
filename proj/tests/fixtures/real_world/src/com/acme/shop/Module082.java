package org.owasp.benchmark.testcode;

public class Module082 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module082");
        sinkHash(param);
    }
}
