#include "pgmr/metrics.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

#include <nlohmann/json.hpp>

#include "http.h"
#include "pgmr/error.h"
#include "pgmr/text.h"

namespace pgmr {

using json = nlohmann::json;

bool Sqm(std::string_view predicted, std::string_view gold,
         const CanonicalizeOptions &options) {
  try {
    return Canonicalize(Parse(predicted), options) ==
           Canonicalize(Parse(gold), options);
  } catch (const Error &) {
    return false;
  }
}

std::vector<std::string> BleuTokens(std::string_view text) {
  static constexpr std::string_view kSeparate = "{}().,;?";
  std::vector<std::string> out;
  for (const auto &word : SplitWhitespace(text)) {
    std::string cur;
    for (std::size_t i = 0; i < word.size(); ++i) {
      char c = word[i];
      // '?' opening a variable stays attached to its name.
      bool variable = c == '?' && cur.empty() && i + 1 < word.size() &&
                      kSeparate.find(word[i + 1]) == std::string_view::npos;
      if (!variable && kSeparate.find(c) != std::string_view::npos) {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
        out.emplace_back(1, c);
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
  }
  return out;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts Ngrams(const std::vector<std::string> &tokens, std::size_t n) {
  NgramCounts counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  }
  return counts;
}

}  // namespace

double Bleu(std::string_view predicted, std::string_view gold) {
  constexpr int kMaxOrder = 4;
  constexpr double kEpsilon = 0.1;
  auto hyp = BleuTokens(predicted);
  auto ref = BleuTokens(gold);
  if (hyp.empty() || ref.empty()) return 0.0;

  double log_sum = 0.0;
  int orders = 0;
  for (int n = 1; n <= kMaxOrder; ++n) {
    if (hyp.size() < static_cast<std::size_t>(n)) break;
    NgramCounts h = Ngrams(hyp, n);
    NgramCounts r = Ngrams(ref, n);
    int total = static_cast<int>(hyp.size()) - n + 1;
    int matched = 0;
    for (const auto &[gram, count] : h) {
      auto it = r.find(gram);
      if (it != r.end()) matched += std::min(count, it->second);
    }
    // No unigram overlap at all: nothing to smooth.
    if (n == 1 && matched == 0) return 0.0;
    double p = matched > 0 ? static_cast<double>(matched) / total : kEpsilon / total;
    log_sum += std::log(p);
    ++orders;
  }
  double bp = 1.0;
  if (hyp.size() < ref.size()) {
    bp = std::exp(1.0 - static_cast<double>(ref.size()) / hyp.size());
  }
  return std::clamp(100.0 * bp * std::exp(log_sum / orders), 0.0, 100.0);
}

bool UriEm(std::string_view predicted, std::string_view gold, UriKind kind) {
  UriSets p = ExtractUris(predicted);
  UriSets g = ExtractUris(gold);
  return kind == UriKind::kEntity ? p.entities == g.entities
                                  : p.relations == g.relations;
}

bool Hallucination(std::string_view predicted, const Memory &entities,
                   const Memory &relations) {
  UriSets uris = ExtractUris(predicted);
  for (const auto &u : uris.entities) {
    if (!entities.Contains(u)) return true;
  }
  for (const auto &u : uris.relations) {
    if (!relations.Contains(u)) return true;
  }
  return false;
}

RefusalSummary RefusalAccuracy(std::span<const RefusalItem> items) {
  RefusalSummary s;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].answerable) {
      s.answerable.push_back(i);
      continue;
    }
    ++s.unanswerable;
    if (items[i].status == GroundingStatus::kRefusal) ++s.refused_unanswerable;
  }
  if (s.unanswerable > 0) {
    s.refusal_accuracy = 100.0 * s.refused_unanswerable / s.unanswerable;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Answer F1.

QueryResult ParseSparqlJson(std::string_view body) {
  QueryResult r;
  try {
    json j = json::parse(body);
    if (j.contains("boolean")) {
      r.is_boolean = true;
      r.boolean = j["boolean"].get<bool>();
      r.ok = true;
      return r;
    }
    for (const auto &binding : j.at("results").at("bindings")) {
      std::vector<std::string> values;
      for (const auto &[var, term] : binding.items()) {
        std::string v = term.at("value").get<std::string>();
        if (term.contains("xml:lang")) v += "@" + term["xml:lang"].get<std::string>();
        if (term.contains("datatype")) v += "^^" + term["datatype"].get<std::string>();
        values.push_back(std::move(v));
      }
      std::sort(values.begin(), values.end());
      std::string row;
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) row += '\t';
        row += values[i];
      }
      r.rows.insert(std::move(row));
    }
    r.ok = true;
  } catch (const json::exception &e) {
    r.ok = false;
    r.error = std::string("bad results document: ") + e.what();
  }
  return r;
}

HttpSparqlEndpoint::HttpSparqlEndpoint(SparqlEndpointConfig config)
    : config_(std::move(config)) {
  if (config_.url.empty()) throw Error("SPARQL endpoint url is empty");
}

QueryResult HttpSparqlEndpoint::Execute(const std::string &query) const {
  if (config_.min_interval.count() > 0) {
    std::lock_guard<std::mutex> lock(mu_);
    auto next = last_ + config_.min_interval;
    auto now = std::chrono::steady_clock::now();
    if (now < next) std::this_thread::sleep_for(next - now);
    last_ = std::chrono::steady_clock::now();
  }
  // Split "scheme://host[:port]/path".
  std::size_t scheme = config_.url.find("://");
  std::size_t slash = config_.url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  http::Request req;
  req.base_url = config_.url.substr(0, slash);
  req.path = slash == std::string::npos ? "/" : config_.url.substr(slash);
  req.timeout = config_.timeout;
  req.headers = {{"Accept", "application/sparql-results+json"},
                 {"User-Agent", config_.user_agent}};
  QueryResult r;
  try {
    http::Response res = http::Get(req, {{"query", query}},
                                   {config_.max_retries, std::chrono::milliseconds(500)});
    if (res.status != 200) {
      r.error = "HTTP " + std::to_string(res.status);
      return r;
    }
    return ParseSparqlJson(res.body);
  } catch (const TransportError &e) {
    r.error = e.what();
    return r;
  }
}

double ResultF1(const QueryResult &predicted, const QueryResult &gold) {
  if (gold.is_boolean || predicted.is_boolean) {
    return gold.is_boolean && predicted.is_boolean &&
                   gold.boolean == predicted.boolean
               ? 1.0
               : 0.0;
  }
  if (gold.rows.empty() && predicted.rows.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto &row : predicted.rows) common += gold.rows.count(row);
  if (common == 0) return 0.0;
  double precision = static_cast<double>(common) / predicted.rows.size();
  double recall = static_cast<double>(common) / gold.rows.size();
  return 2.0 * precision * recall / (precision + recall);
}

AnswerScore AnswerF1(const std::string &predicted, const std::string &gold,
                     const SparqlEndpointClient &endpoint) {
  AnswerScore s;
  QueryResult g = endpoint.Execute(gold);
  if (!g.ok) {
    s.excluded = true;
    s.reason = "gold query failed: " + g.error;
    return s;
  }
  QueryResult p = endpoint.Execute(predicted);
  if (!p.ok) {
    s.reason = "predicted query failed: " + p.error;
    return s;
  }
  s.f1 = ResultF1(p, g);
  return s;
}

// ---------------------------------------------------------------------------

QueryPairJudgment Judge(PredictionStatus status, std::string_view predicted,
                        std::string_view raw_text, std::string_view gold,
                        const Memory &entities, const Memory &relations) {
  QueryPairJudgment j;
  if (status != PredictionStatus::kQuery) {
    j.refused = status == PredictionStatus::kRefused;
    j.malformed = status == PredictionStatus::kMalformed;
    j.bleu = Bleu(raw_text, gold);
    return j;
  }
  j.sqm_match = Sqm(predicted, gold);
  j.bleu = Bleu(predicted, gold);
  j.qid_em = UriEm(predicted, gold, UriKind::kEntity);
  j.pid_em = UriEm(predicted, gold, UriKind::kRelation);
  j.hallucinated = Hallucination(predicted, entities, relations);
  return j;
}

EvalReport Aggregate(std::span<const QueryPairJudgment> judgments) {
  EvalReport r;
  r.n = judgments.size();
  if (r.n == 0) return r;
  for (const auto &j : judgments) {
    r.sqm += j.sqm_match;
    r.bleu += j.bleu;
    r.qid_em += j.qid_em;
    r.pid_em += j.pid_em;
    r.uri_hallucination += j.hallucinated;
    r.refused += j.refused;
    r.malformed += j.malformed;
  }
  const double n = static_cast<double>(r.n);
  r.sqm = 100.0 * r.sqm / n;
  r.bleu /= n;
  r.qid_em = 100.0 * r.qid_em / n;
  r.pid_em = 100.0 * r.pid_em / n;
  r.uri_hallucination = 100.0 * r.uri_hallucination / n;
  r.refused = 100.0 * r.refused / n;
  r.malformed = 100.0 * r.malformed / n;
  return r;
}

}  // namespace pgmr
