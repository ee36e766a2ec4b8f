#pragma once

// Few-shot chain-of-thought prompt rendering.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sast_triage/core.hpp"

namespace sast_triage {

inline constexpr std::string_view kSystemMessage =
    "You are a software security expert. Your main task is to analyze potential software vulnerabilities.";

/// Must appear verbatim in every body template.
inline constexpr std::string_view kScaleInstruction =
    "Return a number for your decision ranging from \"0.0\" to \"10.0\"";

inline constexpr std::string_view kContextPlaceholder = "{context_items}";

inline constexpr std::size_t kDefaultBudgetTokens = 8192;

struct FewShotExample {
  std::string context;
  std::string reasoning;
  std::string decision;

  bool operator==(const FewShotExample&) const = default;
};

struct PromptTemplate {
  std::string system_message;
  std::vector<FewShotExample> fewshot_examples;
  std::string body_template;

  /// Throws std::invalid_argument unless the body holds exactly one
  /// {context_items} placeholder and the scale instruction, and the example
  /// count equals expected_shots.
  void validate(std::size_t expected_shots) const;

  /// First `shots` examples of this template. Throws if it has fewer.
  [[nodiscard]] PromptTemplate with_shots(std::size_t shots) const;

  bool operator==(const PromptTemplate&) const = default;
};

/// The built-in 3-shot template (same text as data/prompts/default_3shot.txt).
const PromptTemplate& default_template();

/// Parses the sectioned template file format. Throws ParseError.
PromptTemplate parse_template(std::string_view text);
std::string format_template(const PromptTemplate& tmpl);

using TokenEstimator = std::function<std::size_t(std::string_view)>;

/// ceil(bytes / 3): a conservative upper bound for BPE tokenizers on code.
std::size_t estimate_tokens(std::string_view text);

struct RenderOptions {
  std::size_t budget_tokens = kDefaultBudgetTokens;
  /// When set, an over-budget prompt is retried with the source cut to
  /// +/- this many lines around the reported line.
  std::optional<int> truncation_window;
  TokenEstimator estimator = estimate_tokens;
};

struct RenderedPrompt {
  std::string finding_id;
  std::string system_message;
  std::string user_message;
  std::size_t estimated_tokens = 0;
  std::string fingerprint;
  bool truncated = false;
};

/// Key/value block: category, CWE-ID, method name, line of code, risk type,
/// then the complete source file. Throws PromptError("unassessable").
std::string build_context_block(const Finding& finding);

/// Source lines [line - window, line + window] with elision markers for the
/// cut regions.
std::string source_window(std::string_view source, int line, int window);

/// Throws PromptError("unassessable") or PromptError("prompt-too-large").
RenderedPrompt render_prompt(const Finding& finding, const PromptTemplate& tmpl, const RenderOptions& options = {});

std::string prompt_fingerprint(std::string_view system_message, std::string_view user_message);

}  // namespace sast_triage
