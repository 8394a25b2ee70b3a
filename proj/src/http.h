#ifndef PGMR_SRC_HTTP_H_
#define PGMR_SRC_HTTP_H_

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace pgmr {
namespace http {

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{200};
};

struct Request {
  std::string base_url;  // scheme://host[:port]
  std::string path;
  std::vector<std::pair<std::string, std::string>> headers;
  std::chrono::milliseconds timeout{30000};
};

struct Response {
  int status = 0;
  std::string body;
};

// Retries connection failures, 429 and 5xx with exponential backoff, then
// throws TransportError. Other statuses are returned to the caller.
Response Post(const Request &request, const std::string &body,
              const std::string &content_type, const RetryPolicy &retry);

Response Get(const Request &request,
             const std::vector<std::pair<std::string, std::string>> &params,
             const RetryPolicy &retry);

}  // namespace http
}  // namespace pgmr

#endif  // PGMR_SRC_HTTP_H_
