#include "pgmr/embedding.h"

#include <cmath>

#include <nlohmann/json.hpp>

#include "http.h"
#include "pgmr/error.h"
#include "pgmr/text.h"

namespace pgmr {

using json = nlohmann::json;

std::vector<Embedding> EmbeddingProvider::EmbedBatch(
    std::span<const std::string> texts) const {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto &t : texts) out.push_back(Embed(t));
  return out;
}

void Normalize(Embedding &v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (sq == 0.0) return;
  double inv = 1.0 / std::sqrt(sq);
  for (float &x : v) x = static_cast<float>(x * inv);
}

// Float products are exact in double, so the rounded sum hardly ever
// depends on summation order and equal true scores compare equal. Eight
// lanes let the loop vectorize without -ffast-math.
float Dot(std::span<const float> a, std::span<const float> b) {
  constexpr std::size_t kLanes = 8;
  const std::size_t n = std::min(a.size(), b.size());
  const std::size_t body = n - n % kLanes;
  double lane[kLanes] = {};
  for (std::size_t i = 0; i < body; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      lane[l] += static_cast<double>(a[i + l]) * b[i + l];
    }
  }
  double acc = 0.0;
  for (std::size_t i = body; i < n; ++i) acc += static_cast<double>(a[i]) * b[i];
  for (std::size_t l = 0; l < kLanes; ++l) acc += lane[l];
  return static_cast<float>(acc);
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t Mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t Fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return Mix(h);
}

}  // namespace

HashedTrigramEmbedder::HashedTrigramEmbedder(int dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension <= 0) throw Error("embedding dimension must be positive");
}

Embedding HashedTrigramEmbedder::Embed(std::string_view text) const {
  // \x02 and \x03 mark the text boundaries.
  std::string padded = "\x02" + NormalizeLabel(text) + "\x03";
  Embedding v(static_cast<std::size_t>(dimension_), 0.0f);
  auto add = [&](std::string_view gram) {
    std::uint64_t h = Fnv1a(gram, seed_);
    std::size_t bucket = h % static_cast<std::uint64_t>(dimension_);
    v[bucket] += (h >> 63) ? -1.0f : 1.0f;
  };
  if (padded.size() < 3) {
    add(padded);
  } else {
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      add(std::string_view(padded).substr(i, 3));
    }
  }
  Normalize(v);
  return v;
}

// ---------------------------------------------------------------------------

HttpEmbeddingClient::HttpEmbeddingClient(HttpEmbeddingConfig config)
    : config_(std::move(config)) {
  if (config_.base_url.empty()) throw Error("encoder base_url is empty");
  if (config_.dimension <= 0) throw Error("encoder dimension must be set");
  if (config_.batch_size == 0) config_.batch_size = 1;
}

Embedding HttpEmbeddingClient::Embed(std::string_view text) const {
  std::string t(text);
  return Request(std::span<const std::string>(&t, 1)).front();
}

std::vector<Embedding> HttpEmbeddingClient::EmbedBatch(
    std::span<const std::string> texts) const {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size();
       start += config_.batch_size) {
    std::size_t n = std::min(config_.batch_size, texts.size() - start);
    auto part = Request(texts.subspan(start, n));
    for (auto &v : part) out.push_back(std::move(v));
  }
  return out;
}

std::vector<Embedding> HttpEmbeddingClient::Request(
    std::span<const std::string> texts) const {
  json body;
  if (!config_.model.empty()) body["model"] = config_.model;
  body["input"] = json::array();
  for (const auto &t : texts) body["input"].push_back(t);

  http::Request req;
  req.base_url = config_.base_url;
  req.path = config_.path;
  req.timeout = config_.timeout;
  if (!config_.auth_token.empty()) {
    req.headers.emplace_back("Authorization", "Bearer " + config_.auth_token);
  }
  http::Response res = http::Post(req, body.dump(), "application/json",
                                  {config_.max_retries, config_.initial_backoff});
  if (res.status != 200) {
    throw Error("encoder returned HTTP " + std::to_string(res.status) + ": " +
                res.body.substr(0, 200));
  }
  std::vector<Embedding> out;
  try {
    json j = json::parse(res.body);
    for (const auto &item : j.at("data")) {
      Embedding v = item.at("embedding").get<Embedding>();
      if (static_cast<int>(v.size()) != config_.dimension) {
        throw Error("encoder returned " + std::to_string(v.size()) +
                    "-dimensional vector, expected " +
                    std::to_string(config_.dimension));
      }
      Normalize(v);
      out.push_back(std::move(v));
    }
  } catch (const json::exception &e) {
    throw Error(std::string("malformed encoder response: ") + e.what());
  }
  if (out.size() != texts.size()) {
    throw Error("encoder returned " + std::to_string(out.size()) +
                " vectors for " + std::to_string(texts.size()) + " inputs");
  }
  return out;
}

}  // namespace pgmr
