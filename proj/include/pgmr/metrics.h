#ifndef PGMR_METRICS_H_
#define PGMR_METRICS_H_

#include <chrono>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pgmr/kg_store.h"
#include "pgmr/retrieval.h"
#include "pgmr/sparql.h"

namespace pgmr {

// Semantic query match: canonical heads, tails and WHERE triple multisets
// are equal. False when either side fails to parse.
bool Sqm(std::string_view predicted, std::string_view gold,
         const CanonicalizeOptions &options = {});

// Whitespace split, then { } ( ) . , ; and a lone ? as separate tokens;
// variables stay whole.
std::vector<std::string> BleuTokens(std::string_view text);

// Sentence BLEU-4 in [0, 100]: uniform weights, brevity penalty, and 0.1
// in place of a zero n-gram match count. Orders for which the prediction has
// no n-grams are left out of the geometric mean. 0 if either side is empty.
double Bleu(std::string_view predicted, std::string_view gold);

// Equality of the URI sets of one kind.
bool UriEm(std::string_view predicted, std::string_view gold, UriKind kind);

// True if the query uses a URI missing from the memory of its kind.
bool Hallucination(std::string_view predicted, const Memory &entities,
                   const Memory &relations);

struct RefusalItem {
  GroundingStatus status;
  bool answerable;
};

struct RefusalSummary {
  // Percentage of unanswerable items that were refused; unset when there
  // are none.
  std::optional<double> refusal_accuracy;
  std::size_t unanswerable = 0;
  std::size_t refused_unanswerable = 0;
  std::vector<std::size_t> answerable;  // indices, for SQM on that subset
};

RefusalSummary RefusalAccuracy(std::span<const RefusalItem> items);

// ---------------------------------------------------------------------------
// Answer-level F1.

struct QueryResult {
  bool ok = false;
  std::string error;
  bool is_boolean = false;
  bool boolean = false;
  // Each row: the bound values, sorted and joined; variable names dropped.
  std::set<std::string> rows;
};

class SparqlEndpointClient {
 public:
  virtual ~SparqlEndpointClient() = default;
  // Never throws for query-level failures; they come back with ok = false.
  virtual QueryResult Execute(const std::string &query) const = 0;
};

struct SparqlEndpointConfig {
  std::string url;  // full endpoint URL, e.g. https://query.wikidata.org/sparql
  std::chrono::milliseconds timeout{30000};
  std::chrono::milliseconds min_interval{0};  // rate limit between requests
  int max_retries = 2;
  std::string user_agent = "pgmr/0.1";
};

// SPARQL protocol GET with application/sparql-results+json.
class HttpSparqlEndpoint : public SparqlEndpointClient {
 public:
  explicit HttpSparqlEndpoint(SparqlEndpointConfig config);
  QueryResult Execute(const std::string &query) const override;

 private:
  SparqlEndpointConfig config_;
  mutable std::mutex mu_;
  mutable std::chrono::steady_clock::time_point last_;
};

// Parses a SPARQL JSON results document.
QueryResult ParseSparqlJson(std::string_view body);

struct AnswerScore {
  bool excluded = false;  // gold failed; sample left out of the mean
  double f1 = 0.0;
  std::string reason;
};

AnswerScore AnswerF1(const std::string &predicted, const std::string &gold,
                     const SparqlEndpointClient &endpoint);

// F1 of two result sets; two empty sets score 1, ASK results compare their
// booleans.
double ResultF1(const QueryResult &predicted, const QueryResult &gold);

// ---------------------------------------------------------------------------
// Per-query judgment and aggregation.

enum class PredictionStatus { kQuery, kRefused, kMalformed };

struct QueryPairJudgment {
  bool sqm_match = false;
  double bleu = 0.0;
  bool qid_em = false;
  bool pid_em = false;
  bool hallucinated = false;
  bool refused = false;
  bool malformed = false;
};

// Refused and malformed predictions score false everywhere except BLEU,
// which is computed on `raw_text`.
QueryPairJudgment Judge(PredictionStatus status, std::string_view predicted,
                        std::string_view raw_text, std::string_view gold,
                        const Memory &entities, const Memory &relations);

struct EvalReport {
  std::size_t n = 0;
  double sqm = 0.0;  // percentages unless noted
  double bleu = 0.0;  // mean
  double qid_em = 0.0;
  double pid_em = 0.0;
  double uri_hallucination = 0.0;
  double refused = 0.0;
  double malformed = 0.0;
  std::optional<double> refusal_accuracy;
  std::optional<double> f1;  // mean answer F1 over scored samples
  std::size_t f1_scored = 0;
  std::size_t f1_excluded = 0;
};

EvalReport Aggregate(std::span<const QueryPairJudgment> judgments);

}  // namespace pgmr

#endif  // PGMR_METRICS_H_
