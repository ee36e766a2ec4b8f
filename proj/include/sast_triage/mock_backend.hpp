#pragma once

// In-process backends for tests, demos and fixture recording.

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sast_triage/gateway.hpp"

namespace sast_triage {

/// Answers from a script keyed by finding id; run i of a finding gets
/// responses[i % size]. Unscripted findings get the default response, or a
/// deterministic pseudo-score derived from the prompt when there is none.
///
/// Script file shape:
///   {"default": "...", "findings": {"<finding id>": ["run 0 text", "run 1 text"]}}
class MockChatBackend : public ChatBackend {
 public:
  MockChatBackend() = default;
  /// Throws ParseError on a malformed script.
  static std::shared_ptr<MockChatBackend> from_script(std::string_view json_text);

  void script(const std::string& finding_id, std::vector<std::string> responses);
  void set_default(std::string response);

  BackendReply send(const ModelEndpoint& endpoint, const CompletionRequest& request) override;

  [[nodiscard]] std::size_t calls() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::vector<std::string>> responses_;
  std::optional<std::string> default_response_;
  std::size_t calls_ = 0;
};

/// Plays back a fixed queue of replies regardless of the request; an empty
/// queue answers 500.
class ScriptedBackend : public ChatBackend {
 public:
  explicit ScriptedBackend(std::deque<BackendReply> replies) : replies_(std::move(replies)) {}

  BackendReply send(const ModelEndpoint& endpoint, const CompletionRequest& request) override;

  [[nodiscard]] std::size_t calls() const;
  [[nodiscard]] std::vector<CompletionRequest> requests() const;

 private:
  mutable std::mutex mutex_;
  std::deque<BackendReply> replies_;
  std::vector<CompletionRequest> requests_;
};

}  // namespace sast_triage
