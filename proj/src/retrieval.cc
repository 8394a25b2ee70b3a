#include "pgmr/retrieval.h"

#include <algorithm>
#include <chrono>
#include <limits>

#include "pgmr/error.h"
#include "pgmr/sparql.h"

namespace pgmr {
namespace {

bool Better(const ScoredUri &a, const ScoredUri &b) {
  if (a.score != b.score) return a.score > b.score;
  return a.uri.id() < b.uri.id();
}

// Keeps the best k items seen so far, best first.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { items_.reserve(k + 1); }

  void Offer(const ScoredUri &item) {
    if (k_ == 0) return;
    if (items_.size() == k_ && !Better(item, items_.back())) return;
    auto pos = std::upper_bound(items_.begin(), items_.end(), item, Better);
    items_.insert(pos, item);
    if (items_.size() > k_) items_.pop_back();
  }

  // Scores strictly below this cannot enter.
  float floor() const {
    return items_.size() < k_ ? -std::numeric_limits<float>::infinity()
                              : items_.back().score;
  }

  std::vector<ScoredUri> Take() { return std::move(items_); }

 private:
  std::size_t k_;
  std::vector<ScoredUri> items_;
};

// A threshold of zero or less turns refusal off, even for negative cosines.
bool Accept(float score, double threshold) { return threshold <= 0.0 || score >= threshold; }

RetrievalResult Decide(std::vector<ScoredUri> candidates, double threshold) {
  RetrievalResult r;
  r.candidates = std::move(candidates);
  if (r.candidates.empty()) return r;
  r.score = r.candidates.front().score;
  if (Accept(r.score, threshold)) {
    r.uri = r.candidates.front().uri;
    r.method = RetrievalMethod::kEmbedding;
  }
  return r;
}

}  // namespace

const char *RetrievalMethodName(RetrievalMethod method) {
  switch (method) {
    case RetrievalMethod::kExactLabel: return "exact_label";
    case RetrievalMethod::kEmbedding: return "embedding";
    case RetrievalMethod::kRefused: return "refused";
  }
  return "?";
}

const char *GroundingStatusName(GroundingStatus status) {
  switch (status) {
    case GroundingStatus::kGrounded: return "grounded";
    case GroundingStatus::kRefusal: return "refused";
    case GroundingStatus::kMalformed: return "malformed";
  }
  return "?";
}

std::vector<ScoredUri> NearestRecords(const Memory &memory,
                                      const Embedding &query, std::size_t k) {
  const FlatIndex &index = memory.vector_index();
  if (index.size() == 0) return {};
  if (static_cast<int>(query.size()) != index.dimension()) {
    throw Error("query embedding has dimension " + std::to_string(query.size()) +
                ", memory has " + std::to_string(index.dimension()));
  }
  // Screen with the fast scores, then rank every row that could still be
  // in the top k by its exact score.
  std::vector<float> scores = index.Scores(query);
  TopK screen(k);
  for (std::size_t row = 0; row < scores.size(); ++row) {
    if (scores[row] < screen.floor()) continue;
    screen.Offer({memory.IndexRecord(row).uri, scores[row]});
  }
  const float cutoff = screen.floor() - 2 * FlatIndex::kScreenError;
  TopK top(k);
  for (std::size_t row = 0; row < scores.size(); ++row) {
    if (scores[row] < cutoff) continue;
    top.Offer({memory.IndexRecord(row).uri, index.Score(row, query)});
  }
  return top.Take();
}

RetrievalResult Retrieve(const PlaceholderBinding &binding, const Memory &memory,
                         const EmbeddingProvider &embedder, double threshold,
                         const RetrievalOptions &options) {
  if (binding.kind != memory.kind()) {
    throw Error(binding.name + " looked up in the " + UriKindName(memory.kind()) +
                " memory");
  }
  if (memory.empty()) return {};

  std::vector<const KgRecord *> hits = memory.LookupLabel(binding.label);
  if (hits.size() == 1) {
    RetrievalResult r;
    r.score = 1.0f;
    r.candidates = {{hits.front()->uri, 1.0f}};
    if (Accept(r.score, threshold)) {
      r.uri = hits.front()->uri;
      r.method = RetrievalMethod::kExactLabel;
    }
    return r;
  }

  if (memory.embedded_count() == 0) {
    throw Error("memory has no embeddings; run embed-memory first");
  }
  Embedding query = embedder.Embed(EmbeddingText(binding.label, binding.description));
  std::size_t k = std::max<std::size_t>(1, options.diagnostics_k);
  if (options.restrict_to_label_ties && hits.size() > 1) {
    TopK top(k);
    for (const KgRecord *rec : hits) {
      if (rec->embedding) top.Offer({rec->uri, Dot(*rec->embedding, query)});
    }
    return Decide(top.Take(), threshold);
  }
  return Decide(NearestRecords(memory, query, k), threshold);
}

GroundingOutcome GroundQuery(const IntermediateQuery &query,
                             const Memory &entities, const Memory &relations,
                             const EmbeddingProvider &embedder, double threshold,
                             const RetrievalOptions &options) {
  using Clock = std::chrono::steady_clock;
  GroundingOutcome out;

  std::vector<std::string> missing = query.defects;
  for (const auto &name : TemplatePlaceholders(query.template_text)) {
    if (!query.Binding(name) &&
        std::find(missing.begin(), missing.end(), name) == missing.end()) {
      missing.push_back(name);
    }
  }
  if (!missing.empty()) {
    out.status = GroundingStatus::kMalformed;
    out.detail = "placeholders without binding:";
    for (const auto &m : missing) out.detail += " " + m;
    return out;
  }

  // URIs the model wrote directly rather than as placeholders.
  UriSets literal = ExtractUris(query.template_text);
  for (const auto &u : literal.entities) {
    if (!entities.Contains(u)) out.refused.push_back(u.canonical_text());
  }
  for (const auto &u : literal.relations) {
    if (!relations.Contains(u)) out.refused.push_back(u.canonical_text());
  }

  std::map<std::string, UriRef> chosen;
  for (const auto &b : query.bindings) {
    const Memory &memory = b.kind == UriKind::kEntity ? entities : relations;
    auto start = Clock::now();
    RetrievalResult r = Retrieve(b, memory, embedder, threshold, options);
    out.lookup_seconds.push_back(
        std::chrono::duration<double>(Clock::now() - start).count());
    if (r.uri) {
      chosen.emplace(b.name, *r.uri);
    } else {
      out.refused.push_back(b.name);
    }
    out.resolutions.emplace(b.name, std::move(r));
  }

  if (!out.refused.empty()) {
    out.status = GroundingStatus::kRefusal;
    return out;
  }
  out.status = GroundingStatus::kGrounded;
  out.sparql = SubstitutePlaceholders(query.template_text, chosen);
  return out;
}

std::vector<ScoredUri> RetrieveTopkForQuestion(std::string_view question,
                                               const Memory &memory,
                                               const EmbeddingProvider &embedder,
                                               std::size_t k) {
  if (k < 1) throw Error("k must be at least 1");
  if (memory.empty()) return {};
  if (memory.embedded_count() == 0) {
    throw Error("memory has no embeddings; run embed-memory first");
  }
  return NearestRecords(memory, embedder.Embed(question), k);
}

}  // namespace pgmr
