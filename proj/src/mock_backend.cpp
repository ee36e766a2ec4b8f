#include "sast_triage/mock_backend.hpp"

#include <cstdio>

#include "sast_triage/errors.hpp"
#include "sast_triage/hash.hpp"

namespace sast_triage {

std::shared_ptr<MockChatBackend> MockChatBackend::from_script(std::string_view json_text) {
  Json j;
  try {
    j = Json::parse(json_text.begin(), json_text.end());
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("mock script is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("mock script must be a JSON object");
  auto backend = std::make_shared<MockChatBackend>();
  if (auto it = j.find("default"); it != j.end()) {
    if (!it->is_string()) throw SchemaError("default", "expected string");
    backend->set_default(it->get<std::string>());
  }
  if (auto it = j.find("findings"); it != j.end()) {
    if (!it->is_object()) throw SchemaError("findings", "expected object");
    for (auto& [id, value] : it->items()) {
      std::vector<std::string> responses;
      if (value.is_string()) {
        responses.push_back(value.get<std::string>());
      } else if (value.is_array()) {
        for (const auto& v : value) {
          if (!v.is_string()) throw SchemaError("findings." + id, "expected strings");
          responses.push_back(v.get<std::string>());
        }
      } else {
        throw SchemaError("findings." + id, "expected string or array of strings");
      }
      if (responses.empty()) throw SchemaError("findings." + id, "needs at least one response");
      backend->script(id, std::move(responses));
    }
  }
  return backend;
}

void MockChatBackend::script(const std::string& finding_id, std::vector<std::string> responses) {
  std::lock_guard lock(mutex_);
  responses_[finding_id] = std::move(responses);
}

void MockChatBackend::set_default(std::string response) {
  std::lock_guard lock(mutex_);
  default_response_ = std::move(response);
}

BackendReply MockChatBackend::send(const ModelEndpoint& endpoint, const CompletionRequest& request) {
  std::lock_guard lock(mutex_);
  ++calls_;
  if (auto it = responses_.find(request.finding_id); it != responses_.end()) {
    const auto& list = it->second;
    return BackendReply{200, list[static_cast<std::size_t>(request.run_index) % list.size()], {}};
  }
  if (default_response_) return BackendReply{200, *default_response_, {}};

  // Pseudo-score in 0.0..10.0 (step 0.5) from the exchange contents.
  const std::string digest = FieldHasher{}
                                 .add(endpoint.model_id)
                                 .add(request.user_message)
                                 .add(request.temperature)
                                 .add(static_cast<long long>(request.run_index))
                                 .hex();
  const unsigned bucket = static_cast<unsigned>(std::stoul(digest.substr(0, 8), nullptr, 16) % 21);
  char decision[16];
  std::snprintf(decision, sizeof decision, "%.1f", bucket / 2.0);
  return BackendReply{200,
                      "Explanation: \"Let's think step by step... (mock response)\"\nDecision: " +
                          std::string(decision),
                      {}};
}

std::size_t MockChatBackend::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

BackendReply ScriptedBackend::send(const ModelEndpoint&, const CompletionRequest& request) {
  std::lock_guard lock(mutex_);
  requests_.push_back(request);
  if (replies_.empty()) return BackendReply{500, {}, "script exhausted"};
  BackendReply reply = std::move(replies_.front());
  replies_.pop_front();
  return reply;
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mutex_);
  return requests_.size();
}

std::vector<CompletionRequest> ScriptedBackend::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

}  // namespace sast_triage
