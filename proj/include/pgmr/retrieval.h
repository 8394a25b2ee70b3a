#ifndef PGMR_RETRIEVAL_H_
#define PGMR_RETRIEVAL_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pgmr/embedding.h"
#include "pgmr/kg_store.h"
#include "pgmr/transform.h"
#include "pgmr/uri.h"

namespace pgmr {

constexpr double kDefaultThreshold = 0.85;

enum class RetrievalMethod { kExactLabel, kEmbedding, kRefused };

const char *RetrievalMethodName(RetrievalMethod method);

struct ScoredUri {
  UriRef uri;
  float score = 0.0f;

  bool operator==(const ScoredUri &) const = default;
};

struct RetrievalResult {
  std::optional<UriRef> uri;  // unset iff refused
  float score = 0.0f;
  RetrievalMethod method = RetrievalMethod::kRefused;
  std::vector<ScoredUri> candidates;  // best first
};

struct RetrievalOptions {
  // On several exact-label hits, search only among the tied records
  // instead of the whole memory.
  bool restrict_to_label_ties = false;
  // Number of candidates kept for diagnostics.
  std::size_t diagnostics_k = 5;
};

// Two stages: a unique normalized-label hit wins with score 1.0; otherwise
// the nearest record to EmbeddingText(label, description) by cosine. The
// result is refused when its score is below `threshold`, so any threshold
// above 1 refuses everything. A threshold of 0 or less disables refusal for a
// non-empty memory. Equal scores go to the lowest id.
RetrievalResult Retrieve(const PlaceholderBinding &binding, const Memory &memory,
                         const EmbeddingProvider &embedder, double threshold,
                         const RetrievalOptions &options = {});

enum class GroundingStatus { kGrounded, kRefusal, kMalformed };

const char *GroundingStatusName(GroundingStatus status);

struct GroundingOutcome {
  GroundingStatus status = GroundingStatus::kMalformed;
  std::string sparql;                // set when grounded
  std::vector<std::string> refused;  // placeholders (or raw URIs) refused
  std::string detail;                // reason when malformed
  std::map<std::string, RetrievalResult> resolutions;
  // Wall time of each retriever call, in bindings order.
  std::vector<double> lookup_seconds;
};

// Resolves every binding and substitutes the URIs into the template. Any
// refused binding refuses the whole query. URIs written literally in the
// template must exist in memory, otherwise the query is refused too.
// Placeholders without a binding make the outcome malformed.
GroundingOutcome GroundQuery(const IntermediateQuery &query,
                             const Memory &entities, const Memory &relations,
                             const EmbeddingProvider &embedder,
                             double threshold,
                             const RetrievalOptions &options = {});

// Top-k records by cosine to the question embedding, best first. Returns
// every record when k exceeds the memory size.
std::vector<ScoredUri> RetrieveTopkForQuestion(std::string_view question,
                                               const Memory &memory,
                                               const EmbeddingProvider &embedder,
                                               std::size_t k);

// Top-k rows of the memory's vector index for `query`, ties by lowest id.
std::vector<ScoredUri> NearestRecords(const Memory &memory,
                                      const Embedding &query, std::size_t k);

}  // namespace pgmr

#endif  // PGMR_RETRIEVAL_H_
