#include <gtest/gtest.h>

#include "sast_triage/errors.hpp"
#include "sast_triage/promptgen.hpp"
#include "support.hpp"

using namespace sast_triage;

namespace {

Finding sample_finding() {
  Finding f;
  f.id = "f-1";
  f.tool = "SpotBugs";
  f.category = "SQL_INJECTION_JDBC";
  f.cwe_id = 89;
  f.file_path = "org/a/Lookup.java";
  f.line = 3;
  f.method_name = "doPost";
  f.risk_type = "Potential JDBC Injection";
  f.language_tag = "Java";
  f.source_text = "class Lookup {\n  void doPost() {\n    st.executeQuery(sql);\n  }\n}\n";
  return f;
}

std::string numbered_source(int lines) {
  std::string s;
  for (int i = 1; i <= lines; ++i) s += "line " + std::to_string(i) + "\n";
  return s;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(ContextBlock, FieldsInOrder) {
  EXPECT_EQ(build_context_block(sample_finding()),
            "weakness category: SQL_INJECTION_JDBC\n"
            "CWE-ID: CWE-89\n"
            "method name: doPost\n"
            "line of code: 3\n"
            "security risk type: Potential JDBC Injection\n"
            "source code file (org/a/Lookup.java):\n"
            "class Lookup {\n  void doPost() {\n    st.executeQuery(sql);\n  }\n}");
}

TEST(ContextBlock, UnknownFieldsAndUnassessable) {
  Finding f = sample_finding();
  f.cwe_id = 0;
  f.method_name.reset();
  f.risk_type.reset();
  auto block = build_context_block(f);
  EXPECT_NE(block.find("CWE-ID: unknown\n"), std::string::npos);
  EXPECT_NE(block.find("method name: unknown\n"), std::string::npos);
  f.source_text.clear();
  try {
    build_context_block(f);
    FAIL();
  } catch (const PromptError& e) {
    EXPECT_EQ(e.code(), "unassessable");
  }
}

TEST(Render, DefaultTemplateShape) {
  auto p = render_prompt(sample_finding(), default_template());
  EXPECT_EQ(p.system_message, kSystemMessage);
  EXPECT_NE(p.user_message.find(kScaleInstruction), std::string::npos);
  EXPECT_EQ(p.user_message.find("{context_items}"), std::string::npos);
  EXPECT_EQ(p.user_message.find("{scanner}"), std::string::npos);
  EXPECT_NE(p.user_message.find("FindSecurityBugs"), std::string::npos);
  EXPECT_EQ(count(p.user_message, "Example "), 3u);
  EXPECT_NE(p.user_message.find("st.executeQuery(sql);"), std::string::npos);
  EXPECT_FALSE(p.truncated);
  EXPECT_EQ(p.fingerprint, prompt_fingerprint(p.system_message, p.user_message));
  EXPECT_EQ(p.estimated_tokens, estimate_tokens(p.system_message) + estimate_tokens(p.user_message));
}

TEST(Render, ZeroShotHasNoExamples) {
  auto p = render_prompt(sample_finding(), default_template().with_shots(0));
  EXPECT_EQ(count(p.user_message, "Example "), 0u);
  EXPECT_NE(p.user_message.find(kScaleInstruction), std::string::npos);
  EXPECT_THROW(default_template().with_shots(4), std::invalid_argument);
}

TEST(Render, FingerprintTracksContent) {
  Finding a = sample_finding();
  Finding b = sample_finding();
  b.line = 4;
  EXPECT_EQ(render_prompt(a, default_template()).fingerprint, render_prompt(a, default_template()).fingerprint);
  EXPECT_NE(render_prompt(a, default_template()).fingerprint, render_prompt(b, default_template()).fingerprint);
}

TEST(Budget, OverBudgetWithoutWindowFails) {
  RenderOptions opts;
  opts.budget_tokens = 50;
  try {
    render_prompt(sample_finding(), default_template(), opts);
    FAIL();
  } catch (const PromptError& e) {
    EXPECT_EQ(e.code(), "prompt-too-large");
  }
}

TEST(Budget, TruncationKeepsReportedLine) {
  Finding f = sample_finding();
  f.source_text = numbered_source(400);
  f.line = 200;
  // Independent estimator: one token per whitespace-separated word.
  RenderOptions opts;
  opts.estimator = [](std::string_view s) {
    std::size_t words = 0;
    bool in_word = false;
    for (char c : s) {
      bool ws = c == ' ' || c == '\n' || c == '\t';
      if (!ws && !in_word) ++words;
      in_word = !ws;
    }
    return words;
  };
  auto full = render_prompt(f, default_template(), opts);
  opts.budget_tokens = full.estimated_tokens - 200;
  opts.truncation_window = 5;
  auto cut = render_prompt(f, default_template(), opts);
  EXPECT_TRUE(cut.truncated);
  EXPECT_LE(cut.estimated_tokens, opts.budget_tokens);
  EXPECT_NE(cut.user_message.find("line 195\n"), std::string::npos);
  EXPECT_NE(cut.user_message.find("line 205\n"), std::string::npos);
  EXPECT_EQ(cut.user_message.find("line 194\n"), std::string::npos);
  EXPECT_EQ(cut.user_message.find("line 206\n"), std::string::npos);

  opts.budget_tokens = 10;
  EXPECT_THROW(render_prompt(f, default_template(), opts), PromptError);
}

TEST(SourceWindow, ElisionMarkers) {
  EXPECT_EQ(source_window(numbered_source(10), 5, 1),
            "[... lines 1-3 elided ...]\nline 4\nline 5\nline 6\n[... lines 7-10 elided ...]\n");
  EXPECT_EQ(source_window(numbered_source(3), 1, 5), "line 1\nline 2\nline 3\n");
}

TEST(Template, ValidateChecksPlaceholderScaleAndShots) {
  PromptTemplate t = default_template();
  EXPECT_NO_THROW(t.validate(3));
  EXPECT_THROW(t.validate(2), std::invalid_argument);
  PromptTemplate twice = t;
  twice.body_template += "{context_items}";
  EXPECT_THROW(twice.validate(3), std::invalid_argument);
  PromptTemplate no_scale = t;
  no_scale.body_template = "{context_items}";
  EXPECT_THROW(no_scale.validate(3), std::invalid_argument);
}

TEST(Template, FormatParseRoundTrip) {
  EXPECT_EQ(parse_template(format_template(default_template())), default_template());
}

TEST(Template, DefaultEqualsShippedFile) {
  auto text = test_support::slurp(std::filesystem::path(DATA_DIR) / "prompts" / "default_3shot.txt");
  EXPECT_EQ(parse_template(text), default_template());
  EXPECT_EQ(default_template().fewshot_examples.size(), 3u);
}

TEST(Template, ParseErrors) {
  EXPECT_THROW(parse_template("=== body ===\n{context_items}\n"), ParseError);
  EXPECT_THROW(parse_template("=== system ===\nx\n"), ParseError);
  EXPECT_THROW(parse_template("stray\n=== system ===\nx\n=== body ===\n{context_items}\n"), ParseError);
  EXPECT_THROW(parse_template("=== system ===\nx\n=== nonsense ===\ny\n=== body ===\n{context_items}\n"), ParseError);
  EXPECT_THROW(parse_template("=== system ===\nx\n=== example 1 context ===\nc\n=== body ===\n{context_items}\n"),
               ParseError);
  EXPECT_THROW(parse_template("=== system ===\nx\n=== body ===\nno placeholder\n"), ParseError);
  try {
    parse_template("=== system ===\nx\n=== bogus ===\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
}
