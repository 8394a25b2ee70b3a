#ifndef PGMR_EMBEDDING_H_
#define PGMR_EMBEDDING_H_

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pgmr/kg_store.h"

namespace pgmr {

// Maps text to an L2-normalized vector of fixed dimension. Implementations
// must be deterministic and safe to call from several threads.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual int dimension() const = 0;
  virtual Embedding Embed(std::string_view text) const = 0;

  // Default implementation embeds one text at a time.
  virtual std::vector<Embedding> EmbedBatch(
      std::span<const std::string> texts) const;
};

// Offline embedder: signed feature hashing of character trigrams of the
// case-folded text into `dimension` buckets, then L2 normalization.
class HashedTrigramEmbedder : public EmbeddingProvider {
 public:
  explicit HashedTrigramEmbedder(int dimension = 256, std::uint64_t seed = 0);

  int dimension() const override { return dimension_; }
  Embedding Embed(std::string_view text) const override;

 private:
  int dimension_;
  std::uint64_t seed_;
};

struct HttpEmbeddingConfig {
  std::string base_url;             // e.g. http://localhost:8080
  std::string path = "/v1/embeddings";
  std::string model;
  std::string auth_token;
  int dimension = 0;
  std::size_t batch_size = 32;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{200};
};

// Client for an external encoder behind a batch endpoint. Request body
// {"model", "input": [texts]}; response {"data": [{"embedding": [...]}]}.
// Retries transient failures (connection errors, 429, 5xx) with exponential
// backoff. Returned vectors are re-normalized.
class HttpEmbeddingClient : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingClient(HttpEmbeddingConfig config);

  int dimension() const override { return config_.dimension; }
  Embedding Embed(std::string_view text) const override;
  std::vector<Embedding> EmbedBatch(
      std::span<const std::string> texts) const override;

 private:
  std::vector<Embedding> Request(std::span<const std::string> texts) const;

  HttpEmbeddingConfig config_;
};

// Scales `v` to unit length in place; zero vectors are left unchanged.
void Normalize(Embedding &v);

float Dot(std::span<const float> a, std::span<const float> b);

}  // namespace pgmr

#endif  // PGMR_EMBEDDING_H_
