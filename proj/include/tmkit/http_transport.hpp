#pragma once

#include <cstdlib>
#include <string>

#include <httplib.h>

#include "tmkit/backend.hpp"

// Production HTTP transport. Kept out of backend.hpp so tests can inject a
// fake transport without compiling the full HTTP stack, and so TLS support
// stays a link-time concern of the final binaries.

namespace tmkit::backend {

inline HttpPostFn default_http_post() {
  return [](const std::string& host_port, const std::string& path, const std::string& body,
            const std::string& bearer_token, double timeout_seconds) {
    HttpResponse out;
    httplib::Client client(host_port);  // one client per call: thread-safe by construction
    auto timeout = std::chrono::milliseconds(static_cast<long long>(timeout_seconds * 1000));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      out.transport_error = httplib::to_string(res.error());
      return out;
    }
    out.transport_ok = true;
    out.status = res->status;
    out.body = res->body;
    if (res->has_header("Retry-After")) {
      const std::string v = res->get_header_value("Retry-After");
      char* end = nullptr;
      long long secs = std::strtoll(v.c_str(), &end, 10);
      if (end != v.c_str() && *end == '\0' && secs >= 0) out.retry_after_seconds = secs;
    }
    return out;
  };
}

}  // namespace tmkit::backend
