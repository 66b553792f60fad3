#include <algorithm>
#include <cstdlib>

#include "httplib.h"
#include "ttc/errors.hpp"
#include "ttc/lm_backend.hpp"

namespace ttc {

namespace {

bool mentions_context_overflow(const std::string& body) {
  return body.find("context length") != std::string::npos ||
         body.find("context_length") != std::string::npos ||
         body.find("maximum context") != std::string::npos;
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const std::string& url = config_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base_url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (config_.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
}

json HttpBackend::request_body(const GenRequest& request) const {
  json body{{"prompt", request.context},
            {"max_tokens", request.max_new_tokens},
            {"temperature", request.temperature},
            {"seed", request.seed}};
  if (!config_.model.empty()) body["model"] = config_.model;
  if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;
  return body;
}

GenChunk HttpBackend::parse_response(const json& body, const GenRequest& request) {
  if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
    throw BackendError("completion response without choices", false);
  }
  const json& choice = body["choices"][0];
  GenChunk chunk;
  chunk.text = choice.value("text", std::string());
  const std::string finish = choice.contains("finish_reason") && choice["finish_reason"].is_string()
                                 ? choice["finish_reason"].get<std::string>()
                                 : std::string();

  // vLLM reports the matched stop string in `stop_reason`
  if (auto it = choice.find("stop_reason"); it != choice.end() && it->is_string()) {
    const std::string matched = it->get<std::string>();
    const auto& stops = request.stop_sequences;
    if (auto s = std::find(stops.begin(), stops.end(), matched); s != stops.end()) {
      chunk.stop_index = static_cast<std::size_t>(s - stops.begin());
      chunk.matched_stop = matched;
    }
  }
  if (chunk.matched_stop) {
    chunk.stop_cause = StopCause::stop_sequence_hit;
  } else if (finish == "length") {
    chunk.stop_cause = StopCause::length_limit;
  } else {
    chunk.stop_cause = StopCause::end_of_stream;
  }

  if (auto usage = body.find("usage"); usage != body.end() && usage->contains("completion_tokens")) {
    chunk.tokens_used = (*usage)["completion_tokens"].get<std::uint64_t>();
  } else {
    chunk.tokens_used = whitespace_token_count(chunk.text);
  }
  return chunk;
}

GenChunk HttpBackend::generate_once(const GenRequest& request) const {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);

  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  const std::string payload = request_body(request).dump();
  auto res = client.Post(path_prefix_ + "/completions", headers, payload, "application/json");
  if (!res) {
    throw BackendError("transport error: " + httplib::to_string(res.error()), true);
  }
  if (res->status == 429 || res->status >= 500) {
    throw BackendError("server error " + std::to_string(res->status), true);
  }
  if (res->status == 400 && mentions_context_overflow(res->body)) {
    throw ContextLimitError("context window exceeded: " + res->body,
                            whitespace_token_count(request.context));
  }
  if (res->status != 200) {
    throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body, false);
  }
  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw BackendError(std::string("malformed completion body: ") + e.what(), false);
  }
  return parse_response(body, request);
}

GenChunk HttpBackend::generate(const GenRequest& request) const {
  request.validate();
  return with_retries([&] { return generate_once(request); }, config_.max_attempts,
                      config_.initial_backoff);
}

}  // namespace ttc
