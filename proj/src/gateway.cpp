#include "sast_triage/gateway.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "sast_triage/errors.hpp"
#include "sast_triage/hash.hpp"
#include "sast_triage/promptgen.hpp"

namespace fs = std::filesystem;

namespace sast_triage {
namespace {

void default_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

bool retryable(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

}  // namespace

std::string cache_key(std::string_view model_id, const CompletionRequest& request, int run_index) {
  return FieldHasher{}
      .add(model_id)
      .add(request.system_message)
      .add(request.user_message)
      .add(request.temperature)
      .add(static_cast<long long>(run_index))
      .hex();
}

std::string_view to_string(CacheMode mode) {
  switch (mode) {
    case CacheMode::Live: return "live";
    case CacheMode::Record: return "record";
    case CacheMode::Replay: return "replay";
  }
  return "live";
}

CacheMode cache_mode_from_string(std::string_view name) {
  if (name == "live") return CacheMode::Live;
  if (name == "record") return CacheMode::Record;
  if (name == "replay") return CacheMode::Replay;
  throw ConfigError("unknown mode \"" + std::string(name) + "\" (expected live, record or replay)");
}

ResponseCache::ResponseCache(fs::path directory) : directory_(std::move(directory)) {}

fs::path ResponseCache::path_for(const std::string& key) const {
  return directory_ / key.substr(0, 2) / (key + ".json");
}

std::optional<CacheEntry> ResponseCache::get(const std::string& key) const {
  fs::path path = path_for(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError("corrupt cache entry " + path.string() + ": " + e.what());
  }
  CacheEntry entry;
  entry.key = j.value("key", "");
  if (entry.key != key) throw ParseError("cache entry " + path.string() + " holds a different key");
  entry.model_id = j.value("model_id", "");
  entry.finding_id = j.value("finding_id", "");
  entry.run_index = j.value("run_index", 0);
  entry.temperature = j.value("temperature", 0.0);
  entry.prompt_fingerprint = j.value("prompt_fingerprint", "");
  entry.text = j.value("text", "");
  return entry;
}

bool ResponseCache::put(const CacheEntry& entry) const {
  fs::path path = path_for(entry.key);
  if (fs::exists(path)) return false;
  fs::create_directories(path.parent_path());

  Json j = Json::object();
  j["schema_version"] = kSchemaVersion;
  j["key"] = entry.key;
  j["model_id"] = entry.model_id;
  j["finding_id"] = entry.finding_id;
  j["run_index"] = entry.run_index;
  j["temperature"] = entry.temperature;
  j["prompt_fingerprint"] = entry.prompt_fingerprint;
  j["text"] = entry.text;

  std::ostringstream suffix;
  suffix << ".tmp." << std::this_thread::get_id();
  fs::path tmp = path;
  tmp += suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write cache entry " + tmp.string());
  }
  fs::rename(tmp, path);
  return true;
}

Json chat_request_body(const ModelEndpoint& endpoint, const CompletionRequest& request) {
  Json messages = Json::array();
  if (endpoint.supports_system_message) {
    messages.push_back({{"role", "system"}, {"content", request.system_message}});
    messages.push_back({{"role", "user"}, {"content", request.user_message}});
  } else {
    std::string merged = request.system_message.empty()
                             ? request.user_message
                             : request.system_message + "\n\n" + request.user_message;
    messages.push_back({{"role", "user"}, {"content", merged}});
  }
  Json body = Json::object();
  body["model"] = endpoint.wire_model.empty() ? endpoint.model_id : endpoint.wire_model;
  body["messages"] = std::move(messages);
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_output_tokens;
  return body;
}

std::string chat_response_text(std::string_view body) {
  Json j;
  try {
    j = Json::parse(body.begin(), body.end());
  } catch (const Json::parse_error& e) {
    throw ProtocolError(std::string("completion body is not JSON: ") + e.what());
  }
  const Json* content = nullptr;
  if (j.is_object() && j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
    const Json& choice = j["choices"][0];
    if (choice.contains("message") && choice["message"].contains("content")) {
      content = &choice["message"]["content"];
    } else if (choice.contains("text")) {
      content = &choice["text"];
    }
  }
  if (!content || !content->is_string()) throw ProtocolError("completion body has no choices[0].message.content");
  return content->get<std::string>();
}

std::string redact_secret(std::string text, const ModelEndpoint& endpoint) {
  if (endpoint.api_key_env.empty()) return text;
  const char* secret = std::getenv(endpoint.api_key_env.c_str());
  if (!secret || std::string_view(secret).size() < 4) return text;
  const std::string needle(secret);
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 3)) {
    text.replace(pos, needle.size(), "***");
  }
  return text;
}

RateLimiter::RateLimiter(std::optional<double> requests_per_minute, Sleeper sleeper)
    : sleeper_(std::move(sleeper)) {
  if (requests_per_minute && *requests_per_minute > 0.0) {
    interval_ = std::chrono::nanoseconds(static_cast<long long>(60e9 / *requests_per_minute));
  }
}

void RateLimiter::acquire() {
  if (interval_.count() == 0) return;
  std::chrono::nanoseconds wait{0};
  {
    std::lock_guard lock(mutex_);
    auto now = std::chrono::steady_clock::now();
    if (next_slot_ > now) wait = next_slot_ - now;
    next_slot_ = std::max(now, next_slot_) + interval_;
  }
  if (wait.count() > 0) sleeper_(std::chrono::ceil<std::chrono::milliseconds>(wait));
}

Gateway::Gateway(ModelEndpoint endpoint, std::shared_ptr<ChatBackend> backend, CacheMode mode,
                 std::optional<ResponseCache> cache, Sleeper sleeper)
    : endpoint_(std::move(endpoint)),
      backend_(std::move(backend)),
      mode_(mode),
      cache_(std::move(cache)),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper(default_sleep)),
      limiter_(endpoint_.requests_per_minute, sleeper_) {
  if (mode_ != CacheMode::Live && !cache_) throw ConfigError("record and replay modes need a cache directory");
  if (mode_ != CacheMode::Replay && !backend_) throw ConfigError("no backend configured for " + endpoint_.model_id);
}

GatewayStats Gateway::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

CompletionResponse Gateway::complete(const CompletionRequest& request) {
  const std::string key = cache_key(endpoint_.model_id, request, request.run_index);

  std::promise<CompletionResponse> promise;
  std::shared_future<CompletionResponse> shared;
  bool owner = false;
  {
    std::lock_guard lock(mutex_);
    auto it = in_flight_.find(key);
    if (it != in_flight_.end()) {
      shared = it->second;
    } else {
      shared = promise.get_future().share();
      in_flight_.emplace(key, shared);
      owner = true;
    }
  }
  if (!owner) return shared.get();

  try {
    CompletionResponse response = fetch(request, key);
    promise.set_value(response);
  } catch (...) {
    promise.set_exception(std::current_exception());
  }
  {
    std::lock_guard lock(mutex_);
    in_flight_.erase(key);
  }
  return shared.get();
}

CompletionResponse Gateway::fetch(const CompletionRequest& request, const std::string& key) {
  if (mode_ != CacheMode::Live) {
    if (auto hit = cache_->get(key)) {
      std::lock_guard lock(mutex_);
      ++stats_.cache_hits;
      return CompletionResponse{hit->text, endpoint_.model_id, std::chrono::milliseconds{0}, true, 0};
    }
    if (mode_ == CacheMode::Replay) throw CacheMissError(key, request.finding_id);
  }

  CompletionResponse response = call_with_retries(request);

  if (mode_ == CacheMode::Record) {
    CacheEntry entry{key,
                     endpoint_.model_id,
                     request.finding_id,
                     request.run_index,
                     request.temperature,
                     prompt_fingerprint(request.system_message, request.user_message),
                     response.text};
    if (cache_->put(entry)) {
      std::lock_guard lock(mutex_);
      ++stats_.cache_writes;
    }
  }
  return response;
}

CompletionResponse Gateway::call_with_retries(const CompletionRequest& request) {
  const auto started = std::chrono::steady_clock::now();
  std::string last_error;
  for (int attempt = 0;; ++attempt) {
    limiter_.acquire();
    BackendReply reply = backend_->send(endpoint_, request);
    {
      std::lock_guard lock(mutex_);
      ++stats_.network_calls;
    }

    if (reply.status >= 200 && reply.status < 300) {
      if (reply.text.empty()) {
        throw ProtocolError("empty completion from " + endpoint_.model_id + " for finding " + request.finding_id);
      }
      std::lock_guard lock(mutex_);
      ++stats_.successes;
      return CompletionResponse{
          std::move(reply.text), endpoint_.model_id,
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started), false,
          attempt};
    }

    last_error = redact_secret(reply.status == 0 ? reply.error
                                                 : "HTTP " + std::to_string(reply.status) + ": " + reply.error,
                               endpoint_);
    if (!retryable(reply.status)) {
      throw NonRetryableError(endpoint_.model_id + " rejected the request: " + last_error, reply.status);
    }
    if (attempt >= endpoint_.max_retries) break;

    auto delay = endpoint_.backoff_initial * (1LL << std::min(attempt, 20));
    delay = std::min<std::chrono::milliseconds>(delay, endpoint_.backoff_max);
    spdlog::debug("{}: attempt {} failed ({}), retrying in {} ms", endpoint_.model_id, attempt + 1, last_error,
                  delay.count());
    {
      std::lock_guard lock(mutex_);
      ++stats_.retries;
    }
    sleeper_(delay);
  }
  throw TransportError(endpoint_.model_id + ": giving up after " + std::to_string(endpoint_.max_retries + 1) +
                       " attempts: " + last_error);
}

}  // namespace sast_triage
