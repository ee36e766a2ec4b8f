#pragma once

// Uniform chat-completion access: live HTTP endpoints, scripted mocks and a
// record/replay response cache, with retry, backoff and a rate cap.

#include <chrono>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "sast_triage/serialize.hpp"

namespace sast_triage {

struct ModelEndpoint {
  std::string model_id;
  /// Chat-completions base, e.g. "https://api.openai.com/v1"; "mock://" for the built-in mock.
  std::string base_url;
  /// Model name sent on the wire; model_id when empty.
  std::string wire_model;
  /// Name of the environment variable holding the API key. Never the key itself.
  std::string api_key_env;
  int max_retries = 3;
  std::chrono::milliseconds timeout{120'000};
  std::chrono::milliseconds backoff_initial{1'000};
  std::chrono::milliseconds backoff_max{60'000};
  std::optional<double> requests_per_minute;
  bool supports_system_message = true;
};

struct CompletionRequest {
  std::string system_message;
  std::string user_message;
  double temperature = 0.0;
  int max_output_tokens = 1024;
  // Provenance only: not sent on the wire. run_index is part of the cache key.
  int run_index = 0;
  std::string finding_id;
};

struct CompletionResponse {
  std::string text;
  std::string model_id;
  std::chrono::milliseconds latency{0};
  bool from_cache = false;
  int retries = 0;
};

/// Deterministic key over (model_id, system, user, temperature, run_index).
std::string cache_key(std::string_view model_id, const CompletionRequest& request, int run_index);

enum class CacheMode { Live, Record, Replay };

std::string_view to_string(CacheMode mode);
/// Throws ConfigError for unknown names.
CacheMode cache_mode_from_string(std::string_view name);

struct CacheEntry {
  std::string key;
  std::string model_id;
  std::string finding_id;
  int run_index = 0;
  double temperature = 0.0;
  std::string prompt_fingerprint;
  std::string text;
};

/// Append-only directory of JSON files, one per key, laid out as
/// <dir>/<key[0:2]>/<key>.json. Writes go through a temp file and rename.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path directory);

  [[nodiscard]] std::optional<CacheEntry> get(const std::string& key) const;
  /// Returns false if the key already existed (existing entries are never replaced).
  bool put(const CacheEntry& entry) const;
  [[nodiscard]] std::filesystem::path path_for(const std::string& key) const;
  [[nodiscard]] const std::filesystem::path& directory() const { return directory_; }

 private:
  std::filesystem::path directory_;
};

/// Outcome of one wire exchange. status 0 means the request never got an
/// HTTP answer (connection refused, timeout, ...).
struct BackendReply {
  int status = 0;
  std::string text;   // completion text on success
  std::string error;  // diagnostic otherwise
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual BackendReply send(const ModelEndpoint& endpoint, const CompletionRequest& request) = 0;
};

/// Chat-completions JSON body: model, messages (system + user roles, or the
/// system text prepended to the user message), temperature, max_tokens.
Json chat_request_body(const ModelEndpoint& endpoint, const CompletionRequest& request);
/// choices[0].message.content; throws ProtocolError.
std::string chat_response_text(std::string_view body);

/// Talks to an OpenAI-compatible /chat/completions endpoint over HTTP(S).
class HttpChatBackend : public ChatBackend {
 public:
  BackendReply send(const ModelEndpoint& endpoint, const CompletionRequest& request) override;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Spaces request starts at least 60s / rpm apart across all callers.
class RateLimiter {
 public:
  RateLimiter(std::optional<double> requests_per_minute, Sleeper sleeper);
  void acquire();

 private:
  std::chrono::nanoseconds interval_{0};
  Sleeper sleeper_;
  std::mutex mutex_;
  std::chrono::steady_clock::time_point next_slot_{};
};

struct GatewayStats {
  std::size_t network_calls = 0;
  std::size_t retries = 0;
  std::size_t cache_hits = 0;
  std::size_t cache_writes = 0;
  std::size_t successes = 0;
};

class Gateway {
 public:
  Gateway(ModelEndpoint endpoint, std::shared_ptr<ChatBackend> backend, CacheMode mode,
          std::optional<ResponseCache> cache, Sleeper sleeper = {});

  /// Thread-safe. Concurrent calls for the same key share one network exchange.
  /// Throws TransportError (and subclasses), CacheMissError.
  CompletionResponse complete(const CompletionRequest& request);

  [[nodiscard]] const ModelEndpoint& endpoint() const { return endpoint_; }
  [[nodiscard]] CacheMode mode() const { return mode_; }
  [[nodiscard]] GatewayStats stats() const;

 private:
  CompletionResponse fetch(const CompletionRequest& request, const std::string& key);
  CompletionResponse call_with_retries(const CompletionRequest& request);

  ModelEndpoint endpoint_;
  std::shared_ptr<ChatBackend> backend_;
  CacheMode mode_;
  std::optional<ResponseCache> cache_;
  Sleeper sleeper_;
  RateLimiter limiter_;
  mutable std::mutex mutex_;
  GatewayStats stats_;
  std::map<std::string, std::shared_future<CompletionResponse>> in_flight_;
};

/// Replaces every occurrence of the endpoint's secret in text with "***".
std::string redact_secret(std::string text, const ModelEndpoint& endpoint);

}  // namespace sast_triage
