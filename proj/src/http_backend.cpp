#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cstdlib>

#include "sast_triage/errors.hpp"
#include "sast_triage/gateway.hpp"

namespace sast_triage {
namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint base_url needs a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

}  // namespace

BackendReply HttpChatBackend::send(const ModelEndpoint& endpoint, const CompletionRequest& request) {
  SplitUrl url = split_url(endpoint.base_url);
  httplib::Client client(url.origin);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout).count();
  client.set_connection_timeout(static_cast<time_t>(std::max<long long>(1, seconds)), 0);
  client.set_read_timeout(static_cast<time_t>(std::max<long long>(1, seconds)), 0);
  client.set_write_timeout(static_cast<time_t>(std::max<long long>(1, seconds)), 0);

  httplib::Headers headers;
  if (!endpoint.api_key_env.empty()) {
    const char* key = std::getenv(endpoint.api_key_env.c_str());
    if (!key || !*key) {
      throw ConfigError("environment variable " + endpoint.api_key_env + " is not set (needed by " +
                        endpoint.model_id + ")");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const std::string body = chat_request_body(endpoint, request).dump();
  spdlog::debug("POST {}{}/chat/completions model={} bytes={}", url.origin, url.path, endpoint.model_id,
                body.size());
  auto result = client.Post(url.path + "/chat/completions", headers, body, "application/json");
  if (!result) return BackendReply{0, {}, "network error: " + httplib::to_string(result.error())};

  BackendReply reply;
  reply.status = result->status;
  if (result->status >= 200 && result->status < 300) {
    reply.text = chat_response_text(result->body);
  } else {
    reply.error = result->body.substr(0, 512);
  }
  return reply;
}

}  // namespace sast_triage
