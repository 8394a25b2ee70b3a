#include "http.h"

#include <httplib.h>

#include <functional>
#include <thread>

#include "pgmr/error.h"

namespace pgmr {
namespace http {
namespace {

bool Transient(int status) { return status == 429 || status >= 500; }

Response WithRetry(const Request &request, const RetryPolicy &retry,
                   const std::function<httplib::Result(httplib::Client &)> &call) {
  httplib::Client client(request.base_url);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
      request.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  std::string last_error;
  auto backoff = retry.initial_backoff;
  for (int attempt = 0; attempt <= retry.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Result res = call(client);
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (Transient(res->status)) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    return {res->status, res->body};
  }
  throw TransportError(request.base_url + request.path + ": " + last_error +
                       " after " + std::to_string(retry.max_retries + 1) +
                       " attempts");
}

httplib::Headers ToHeaders(const Request &request) {
  httplib::Headers headers;
  for (const auto &[k, v] : request.headers) headers.emplace(k, v);
  return headers;
}

}  // namespace

Response Post(const Request &request, const std::string &body,
              const std::string &content_type, const RetryPolicy &retry) {
  httplib::Headers headers = ToHeaders(request);
  return WithRetry(request, retry, [&](httplib::Client &c) {
    return c.Post(request.path, headers, body, content_type);
  });
}

Response Get(const Request &request,
             const std::vector<std::pair<std::string, std::string>> &params,
             const RetryPolicy &retry) {
  httplib::Headers headers = ToHeaders(request);
  httplib::Params p;
  for (const auto &[k, v] : params) p.emplace(k, v);
  return WithRetry(request, retry, [&](httplib::Client &c) {
    return c.Get(request.path, p, headers);
  });
}

}  // namespace http
}  // namespace pgmr
