#include "sast_triage/promptgen.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <regex>
#include <sstream>

#include "default_template_data.hpp"
#include "sast_triage/errors.hpp"
#include "sast_triage/hash.hpp"

namespace sast_triage {
namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t count = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + 1)) {
    ++count;
  }
  return count;
}

void replace_all(std::string& text, std::string_view from, std::string_view to) {
  for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
    text.replace(pos, from.size(), to);
  }
}

std::string strip_trailing_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

std::string scanner_phrase(const Finding& finding) {
  if (finding.tool == "SpotBugs") return "\"SpotBugs\" with the \"FindSecurityBugs\"-Plugin";
  return "\"" + finding.tool + "\"";
}

std::string context_block(const Finding& f, std::string_view source_section) {
  std::ostringstream out;
  out << "weakness category: " << (f.category.empty() ? std::string("unknown") : f.category) << '\n'
      << "CWE-ID: " << (f.cwe_id > 0 ? "CWE-" + std::to_string(f.cwe_id) : std::string("unknown")) << '\n'
      << "method name: " << f.method_name.value_or("unknown") << '\n'
      << "line of code: " << f.line << '\n'
      << "security risk type: " << f.risk_type.value_or("unknown") << '\n'
      << "source code file (" << f.file_path << "):\n"
      << strip_trailing_newlines(std::string(source_section));
  return out.str();
}

std::string render_examples(const std::vector<FewShotExample>& examples) {
  std::string out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& e = examples[i];
    out += "Example " + std::to_string(i + 1) + ":\n";
    out += "Vulnerability identified by the security scanner and contextual information:\n";
    out += e.context + "\n";
    out += "Explanation: \"Let's think step by step. " + e.reasoning + "\"\n";
    out += "Decision: " + e.decision + "\n\n";
  }
  return out;
}

std::string render_user(const Finding& f, const PromptTemplate& tmpl, std::string_view source_section) {
  std::string body = tmpl.body_template;
  replace_all(body, "{scanner}", scanner_phrase(f));
  replace_all(body, "{language}", f.language_tag.value_or("unknown"));
  auto pos = body.find(kContextPlaceholder);
  body.replace(pos, kContextPlaceholder.size(), "\n" + context_block(f, source_section));
  return render_examples(tmpl.fewshot_examples) + body;
}

}  // namespace

void PromptTemplate::validate(std::size_t expected_shots) const {
  if (count_occurrences(body_template, kContextPlaceholder) != 1) {
    throw std::invalid_argument("template body must contain {context_items} exactly once");
  }
  if (body_template.find(kScaleInstruction) == std::string::npos) {
    throw std::invalid_argument("template body must contain the 0.0-10.0 decision scale instruction");
  }
  if (fewshot_examples.size() != expected_shots) {
    throw std::invalid_argument("template has " + std::to_string(fewshot_examples.size()) +
                                " examples, configuration expects " + std::to_string(expected_shots));
  }
}

PromptTemplate PromptTemplate::with_shots(std::size_t shots) const {
  if (shots > fewshot_examples.size()) {
    throw std::invalid_argument("template provides only " + std::to_string(fewshot_examples.size()) +
                                " examples, " + std::to_string(shots) + " requested");
  }
  PromptTemplate copy = *this;
  copy.fewshot_examples.resize(shots);
  return copy;
}

const PromptTemplate& default_template() {
  static const PromptTemplate tmpl = parse_template(detail::kDefaultTemplateText);
  return tmpl;
}

PromptTemplate parse_template(std::string_view text) {
  static const std::regex header(R"(^=== (.+) ===\s*$)");
  static const std::regex example_part(R"(^example ([0-9]+) (context|reasoning|decision)$)");

  struct Section {
    std::string name;
    int line;
    std::string content;
  };
  std::vector<Section> sections;
  int line_no = 0;
  for (auto line : lines_of(text)) {
    ++line_no;
    std::string l(line);
    if (!l.empty() && l.back() == '\r') l.pop_back();
    std::smatch m;
    if (std::regex_match(l, m, header)) {
      sections.push_back({m[1].str(), line_no, {}});
      continue;
    }
    if (sections.empty()) {
      if (l.empty() || l.front() == '#') continue;
      throw ParseError("template text before the first section", line_no);
    }
    sections.back().content += l;
    sections.back().content += '\n';
  }

  PromptTemplate tmpl;
  bool have_system = false;
  bool have_body = false;
  std::map<int, std::array<std::optional<std::string>, 3>> parts;
  for (auto& s : sections) {
    std::string content = strip_trailing_newlines(std::move(s.content));
    std::smatch m;
    if (s.name == "system") {
      tmpl.system_message = content;
      have_system = true;
    } else if (s.name == "body") {
      tmpl.body_template = content;
      have_body = true;
    } else if (std::regex_match(s.name, m, example_part)) {
      int index = std::stoi(m[1].str());
      int slot = m[2] == "context" ? 0 : (m[2] == "reasoning" ? 1 : 2);
      if (parts[index][slot]) throw ParseError("duplicate section \"" + s.name + "\"", s.line);
      parts[index][slot] = content;
    } else {
      throw ParseError("unknown template section \"" + s.name + "\"", s.line);
    }
  }
  if (!have_system) throw ParseError("template has no system section");
  if (!have_body) throw ParseError("template has no body section");
  int expected = 1;
  for (auto& [index, p] : parts) {
    if (index != expected++) throw ParseError("example sections must be numbered 1..n without gaps");
    if (!p[0] || !p[1] || !p[2]) {
      throw ParseError("example " + std::to_string(index) + " needs context, reasoning and decision sections");
    }
    tmpl.fewshot_examples.push_back({*p[0], *p[1], *p[2]});
  }
  if (count_occurrences(tmpl.body_template, kContextPlaceholder) != 1) {
    throw ParseError("template body must contain {context_items} exactly once");
  }
  return tmpl;
}

std::string format_template(const PromptTemplate& tmpl) {
  std::string out = "=== system ===\n" + tmpl.system_message + "\n";
  for (std::size_t i = 0; i < tmpl.fewshot_examples.size(); ++i) {
    const auto& e = tmpl.fewshot_examples[i];
    const std::string n = std::to_string(i + 1);
    out += "=== example " + n + " context ===\n" + e.context + "\n";
    out += "=== example " + n + " reasoning ===\n" + e.reasoning + "\n";
    out += "=== example " + n + " decision ===\n" + e.decision + "\n";
  }
  out += "=== body ===\n" + tmpl.body_template + "\n";
  return out;
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 2) / 3; }

std::string build_context_block(const Finding& finding) {
  if (!finding.assessable()) {
    throw PromptError("unassessable", "finding " + finding.id + ": " +
                                          finding.unassessable_reason.value_or("no source text attached"));
  }
  return context_block(finding, finding.source_text);
}

std::string source_window(std::string_view source, int line, int window) {
  auto lines = lines_of(source);
  const int total = static_cast<int>(lines.size());
  const int first = std::max(1, line - window);
  const int last = std::min(total, line + window);
  std::string out;
  if (first > 1) out += "[... lines 1-" + std::to_string(first - 1) + " elided ...]\n";
  for (int i = first; i <= last; ++i) {
    out.append(lines[static_cast<std::size_t>(i - 1)]);
    out += '\n';
  }
  if (last < total) {
    out += "[... lines " + std::to_string(last + 1) + "-" + std::to_string(total) + " elided ...]\n";
  }
  return out;
}

std::string prompt_fingerprint(std::string_view system_message, std::string_view user_message) {
  return FieldHasher{}.add(system_message).add(user_message).hex();
}

RenderedPrompt render_prompt(const Finding& finding, const PromptTemplate& tmpl, const RenderOptions& options) {
  if (options.budget_tokens == 0) throw std::invalid_argument("token budget must be positive");
  if (count_occurrences(tmpl.body_template, kContextPlaceholder) != 1) {
    throw std::invalid_argument("template body must contain {context_items} exactly once");
  }
  if (!finding.assessable()) {
    throw PromptError("unassessable", "finding " + finding.id + ": " +
                                          finding.unassessable_reason.value_or("no source text attached"));
  }

  RenderedPrompt prompt;
  prompt.finding_id = finding.id;
  prompt.system_message = tmpl.system_message;
  auto measure = [&](const std::string& user) {
    return options.estimator(prompt.system_message) + options.estimator(user);
  };

  prompt.user_message = render_user(finding, tmpl, finding.source_text);
  prompt.estimated_tokens = measure(prompt.user_message);

  if (prompt.estimated_tokens > options.budget_tokens) {
    if (!options.truncation_window) {
      throw PromptError("prompt-too-large", "finding " + finding.id + ": estimated " +
                                                std::to_string(prompt.estimated_tokens) + " tokens exceeds budget " +
                                                std::to_string(options.budget_tokens));
    }
    std::string window = source_window(finding.source_text, finding.line, *options.truncation_window);
    prompt.user_message = render_user(finding, tmpl, window);
    prompt.estimated_tokens = measure(prompt.user_message);
    prompt.truncated = true;
    if (prompt.estimated_tokens > options.budget_tokens) {
      throw PromptError("prompt-too-large", "finding " + finding.id + ": still " +
                                                std::to_string(prompt.estimated_tokens) +
                                                " tokens after truncation, budget " +
                                                std::to_string(options.budget_tokens));
    }
  }
  prompt.fingerprint = prompt_fingerprint(prompt.system_message, prompt.user_message);
  return prompt;
}

}  // namespace sast_triage
