package org.owasp.benchmark.testcode;

public class Module093 extends HttpServlet {
    public void doPost(HttpServletRequest request, HttpServletResponse response) {
        String param = request.getParameter("module093");
        sinkHash(param);
    }
}
