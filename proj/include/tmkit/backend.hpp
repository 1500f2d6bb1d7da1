#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "tmkit/jsonl.hpp"
#include "tmkit/templates.hpp"
#include "tmkit/text.hpp"

// Completion backends. The deterministic stubs exist so every pipeline
// stage downstream of the model can be exercised and reproduced exactly;
// the HTTP client speaks a single-prompt completion wire format with
// configurable field names. Credentials only ever enter through a named
// environment variable.

namespace tmkit::backend {

struct DecodingParams {
  double temperature = 0.0;
  int max_output_tokens = 0;  // 0: derive from the query length
  std::vector<std::string> stop = {"\n"};
};

// Generous cap scaled to the query: four generated tokens per source token
// plus slack, so truncation never clips a plausible translation.
inline int default_max_output_tokens(const std::string& query_source) {
  return 4 * static_cast<int>(text::count_whitespace_tokens(query_source)) + 16;
}

struct Completion {
  std::string text;
  bool ok = false;
  std::string error;    // empty when ok
  int http_status = 0;  // 0 for stubs and transport failures
  int attempts = 0;
};

struct WireFormat {
  std::string model_field = "model";
  std::string prompt_field = "prompt";
  std::string temperature_field = "temperature";
  std::string max_tokens_field = "max_tokens";
  std::string stop_field = "stop";
  // dotted path into the response JSON; numeric segments index arrays
  std::string completion_path = "choices.0.text";
};

struct BackendConfig {
  std::string kind = "copy-stub";  // copy-stub | echo-stub | http
  std::string endpoint;            // http backends: scheme://host[:port]/path
  std::string model;
  std::string api_key_env;  // name of the env var holding the credential
  WireFormat wire;
  jsonl::ordered_json extra_request_fields = jsonl::ordered_json::object();
  int max_in_flight = 4;
  int max_retries = 3;  // additional attempts after the first
  double timeout_seconds = 30.0;
  int retry_initial_delay_ms = 500;  // doubles per retry, capped below
  int retry_max_delay_ms = 8000;
  std::string transcript_path;  // optional request/response JSONL log
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  // Single completion; never throws for per-request failures, reports them
  // in the Completion instead. Must be safe to call concurrently.
  virtual Completion complete(const templates::PromptRequest& request,
                              const DecodingParams& params) = 0;
};

// Returns the target side of the demonstration adjacent to the query. With
// perfect retrieval this reproduces the reference, which pins down the whole
// pipeline; a prompt without demonstrations has no defined answer.
class CopyStubBackend final : public Backend {
 public:
  std::string name() const override { return "copy-stub"; }
  Completion complete(const templates::PromptRequest& request,
                      const DecodingParams&) override {
    Completion c;
    c.attempts = 1;
    if (request.demos.empty()) {
      c.error = "no-demonstration";
      return c;
    }
    c.text = request.demos.back().target;
    c.ok = true;
    return c;
  }
};

class EchoStubBackend final : public Backend {
 public:
  std::string name() const override { return "echo-stub"; }
  Completion complete(const templates::PromptRequest& request,
                      const DecodingParams&) override {
    Completion c;
    c.attempts = 1;
    c.text = request.query;
    c.ok = true;
    return c;
  }
};

namespace detail {

struct ParsedEndpoint {
  std::string host_port;  // scheme://host[:port], as the client wants it
  std::string path;       // leading slash, defaults to "/"
};

inline ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw std::invalid_argument("backend endpoint missing scheme: " + endpoint);
  auto path_start = endpoint.find('/', scheme_end + 3);
  ParsedEndpoint p;
  if (path_start == std::string::npos) {
    p.host_port = endpoint;
    p.path = "/";
  } else {
    p.host_port = endpoint.substr(0, path_start);
    p.path = endpoint.substr(path_start);
  }
  return p;
}

// Walks a dotted path through objects and arrays; numeric segments index
// arrays. Returns nullptr when the path does not resolve.
inline const jsonl::ordered_json* resolve_path(const jsonl::ordered_json& root,
                                               const std::string& dotted) {
  const jsonl::ordered_json* cur = &root;
  size_t start = 0;
  while (start <= dotted.size()) {
    size_t end = dotted.find('.', start);
    if (end == std::string::npos) end = dotted.size();
    std::string seg = dotted.substr(start, end - start);
    if (seg.empty()) return nullptr;
    if (cur->is_array()) {
      size_t idx = 0;
      for (char ch : seg) {
        if (ch < '0' || ch > '9') return nullptr;
        idx = idx * 10 + static_cast<size_t>(ch - '0');
      }
      if (idx >= cur->size()) return nullptr;
      cur = &(*cur)[idx];
    } else if (cur->is_object()) {
      auto it = cur->find(seg);
      if (it == cur->end()) return nullptr;
      cur = &it.value();
    } else {
      return nullptr;
    }
    if (end == dotted.size()) break;
    start = end + 1;
  }
  return cur;
}

}  // namespace detail

// Hooks for the HTTP transport so the client logic is testable and the
// heavy header is only pulled into the one translation unit that needs it.
struct HttpResponse {
  bool transport_ok = false;
  std::string transport_error;
  int status = 0;
  std::string body;
  std::optional<long long> retry_after_seconds;
};

using HttpPostFn = std::function<HttpResponse(
    const std::string& host_port, const std::string& path, const std::string& body,
    const std::string& bearer_token, double timeout_seconds)>;

class HttpBackend final : public Backend {
 public:
  HttpBackend(BackendConfig config, HttpPostFn post)
      : config_(std::move(config)), post_(std::move(post)) {
    if (config_.endpoint.empty())
      throw std::invalid_argument("http backend requires an endpoint");
    endpoint_ = detail::parse_endpoint(config_.endpoint);
    if (!config_.api_key_env.empty()) {
      const char* v = std::getenv(config_.api_key_env.c_str());
      if (v == nullptr || *v == '\0')
        throw std::runtime_error("credential environment variable " + config_.api_key_env +
                                 " is not set");
      api_key_ = v;
    }
    if (!post_) throw std::invalid_argument("http backend requires a transport");
  }

  std::string name() const override { return "http:" + config_.model; }

  Completion complete(const templates::PromptRequest& request,
                      const DecodingParams& params) override {
    jsonl::ordered_json body = config_.extra_request_fields;
    if (!config_.model.empty()) body[config_.wire.model_field] = config_.model;
    body[config_.wire.prompt_field] = request.rendered;
    body[config_.wire.temperature_field] = params.temperature;
    int max_tokens = params.max_output_tokens > 0 ? params.max_output_tokens
                                                  : default_max_output_tokens(request.query);
    body[config_.wire.max_tokens_field] = max_tokens;
    if (!params.stop.empty()) body[config_.wire.stop_field] = params.stop;
    std::string payload = body.dump();

    Completion c;
    int delay_ms = config_.retry_initial_delay_ms;
    for (int attempt = 1; attempt <= config_.max_retries + 1; ++attempt) {
      c.attempts = attempt;
      HttpResponse resp =
          post_(endpoint_.host_port, endpoint_.path, payload, api_key_,
                config_.timeout_seconds);
      bool retryable;
      if (!resp.transport_ok) {
        c.http_status = 0;
        c.error = "transport: " + resp.transport_error;
        retryable = true;
      } else {
        c.http_status = resp.status;
        if (resp.status >= 200 && resp.status < 300) {
          return parse_body(resp.body, c);
        }
        c.error = "http status " + std::to_string(resp.status);
        retryable = resp.status == 429 || resp.status >= 500;
      }
      if (!retryable || attempt == config_.max_retries + 1) break;
      long long sleep_ms = delay_ms;
      if (resp.retry_after_seconds) sleep_ms = *resp.retry_after_seconds * 1000;
      std::this_thread::sleep_for(std::chrono::milliseconds(sleep_ms));
      delay_ms = std::min(delay_ms * 2, config_.retry_max_delay_ms);
    }
    c.ok = false;
    return c;
  }

 private:
  Completion parse_body(const std::string& body, Completion c) const {
    jsonl::ordered_json parsed;
    try {
      parsed = jsonl::ordered_json::parse(body);
    } catch (const std::exception& e) {
      c.ok = false;
      c.error = std::string("response is not JSON: ") + e.what();
      return c;
    }
    const jsonl::ordered_json* node = detail::resolve_path(parsed, config_.wire.completion_path);
    if (node == nullptr || !node->is_string()) {
      c.ok = false;
      c.error = "response field " + config_.wire.completion_path + " missing or not a string";
      return c;
    }
    c.text = node->get<std::string>();
    c.ok = true;
    c.error.clear();
    return c;
  }

  BackendConfig config_;
  HttpPostFn post_;
  detail::ParsedEndpoint endpoint_;
  std::string api_key_;
};

// The transport argument is only consulted for the http kind; stubs ignore
// it. See http_transport.hpp for the production transport.
inline std::unique_ptr<Backend> make_backend(const BackendConfig& config,
                                             HttpPostFn post = nullptr) {
  if (config.kind == "copy-stub") return std::make_unique<CopyStubBackend>();
  if (config.kind == "echo-stub") return std::make_unique<EchoStubBackend>();
  if (config.kind == "http") return std::make_unique<HttpBackend>(config, std::move(post));
  throw std::invalid_argument("unknown backend kind: " + config.kind);
}

// Runs a batch with at most config.max_in_flight requests in flight.
// Results keep the order of the inputs. With fail_fast, no new request is
// issued after the first failure; requests never issued report "canceled".
inline std::vector<Completion> translate_batch(Backend& backend,
                                               const std::vector<templates::PromptRequest>& requests,
                                               const DecodingParams& params,
                                               int max_in_flight, bool fail_fast = false) {
  if (max_in_flight < 1) throw std::invalid_argument("max_in_flight must be positive");
  std::vector<Completion> results(requests.size());
  if (requests.empty()) return results;

  std::atomic<size_t> next{0};
  std::atomic<bool> stop{false};
  auto worker = [&]() {
    for (;;) {
      if (fail_fast && stop.load()) return;
      size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      if (fail_fast && stop.load()) {
        results[i].ok = false;
        results[i].error = "canceled";
        continue;
      }
      results[i] = backend.complete(requests[i], params);
      if (!results[i].ok && fail_fast) stop.store(true);
    }
  };

  size_t n_workers = std::min<size_t>(static_cast<size_t>(max_in_flight), requests.size());
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  for (auto& r : results) {
    if (!r.ok && r.attempts == 0 && r.error.empty()) r.error = "canceled";
  }
  return results;
}

// Appends one line per completion; usable as a lightweight audit log.
inline void append_transcript(const std::string& path,
                              const std::vector<templates::PromptRequest>& requests,
                              const std::vector<Completion>& completions) {
  if (path.empty()) return;
  if (requests.size() != completions.size())
    throw std::invalid_argument("transcript: request/completion count mismatch");
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  jsonl::Writer out(path, /*append=*/true);
  for (size_t i = 0; i < requests.size(); ++i) {
    jsonl::ordered_json rec;
    rec["query_id"] = requests[i].query_id;
    rec["template_id"] = requests[i].template_id;
    rec["prompt"] = requests[i].rendered;
    rec["ok"] = completions[i].ok;
    rec["text"] = completions[i].text;
    rec["error"] = completions[i].error;
    rec["http_status"] = completions[i].http_status;
    rec["attempts"] = completions[i].attempts;
    out.write(rec);
  }
}

}  // namespace tmkit::backend
