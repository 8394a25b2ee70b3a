#include "pgmr/harness.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "pgmr/sparql.h"
#include "pgmr/synthetic.h"
#include "pgmr/text.h"
#include "pgmr/transform.h"

namespace pgmr {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double Since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t Pick(std::mt19937_64 &rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

template <typename T>
void Shuffle(std::vector<T> &v, std::mt19937_64 &rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[Pick(rng, i)]);
  }
}

double Mean(const std::vector<double> &v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string IdString(const json &v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_null()) return "";
  return v.dump();
}

std::string NonEmptyString(const json &obj, const char *key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) return "";
  return std::string(Trim(it->get<std::string>()));
}

// Adds the sample, or quarantines it when the gold query does not parse.
void Admit(Dataset &ds, DatasetSample s) {
  if (Trim(s.gold_sparql).empty()) {
    ds.quarantined.push_back({s.id, "empty gold query"});
    return;
  }
  try {
    Parse(s.gold_sparql);
  } catch (const SyntaxError &e) {
    ds.quarantined.push_back({s.id, e.what()});
    return;
  }
  ds.samples.push_back(std::move(s));
}

void ParseLcquadRecord(Dataset &ds, const json &rec, std::size_t index) {
  if (!rec.is_object()) {
    throw FormatError("record #" + std::to_string(index) + " is not an object");
  }
  DatasetSample s;
  s.id = rec.contains("uid") ? IdString(rec["uid"]) : "";
  if (s.id.empty()) s.id = "#" + std::to_string(index);
  for (const char *key : {"question", "paraphrased_question", "NNQT_question"}) {
    s.question = NonEmptyString(rec, key);
    if (!s.question.empty()) break;
  }
  if (s.question.empty()) {
    throw FormatError("record " + s.id + ": no question text");
  }
  auto it = rec.find("sparql_wikidata");
  if (it == rec.end() || !it->is_string()) {
    throw FormatError("record " + s.id + ": missing sparql_wikidata");
  }
  s.gold_sparql = it->get<std::string>();
  if (auto sp = rec.find("split"); sp != rec.end() && sp->is_string()) {
    std::string name = sp->get<std::string>();
    if (name == "valid") s.split = Split::kValid;
    if (name == "test") s.split = Split::kTest;
  }
  Admit(ds, std::move(s));
}

}  // namespace

// ---------------------------------------------------------------------------
// Datasets.

const char *SplitName(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

std::optional<DatasetFormat> ParseDatasetFormat(std::string_view name) {
  std::string n = AsciiLower(name);
  if (n == "lcquad2" || n == "lcquad2-like" || n == "lcquad") {
    return DatasetFormat::kLcquad2;
  }
  if (n == "qald" || n == "qald-like" || n == "qald10") return DatasetFormat::kQald;
  return std::nullopt;
}

Dataset ParseDataset(std::string_view contents, DatasetFormat format) {
  Dataset ds;
  std::string_view body = Trim(contents);
  if (body.empty()) return ds;

  if (format == DatasetFormat::kLcquad2) {
    if (body.front() == '[') {
      json arr;
      try {
        arr = json::parse(body);
      } catch (const json::exception &e) {
        throw FormatError(std::string("dataset is not valid JSON: ") + e.what());
      }
      for (std::size_t i = 0; i < arr.size(); ++i) ParseLcquadRecord(ds, arr[i], i);
      return ds;
    }
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < body.size()) {
      std::size_t nl = body.find('\n', pos);
      if (nl == std::string_view::npos) nl = body.size();
      std::string_view line = Trim(body.substr(pos, nl - pos));
      pos = nl + 1;
      ++line_no;
      if (line.empty()) continue;
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::exception &e) {
        throw FormatError(std::string("invalid JSON: ") + e.what(), line_no);
      }
      ParseLcquadRecord(ds, rec, line_no);
    }
    return ds;
  }

  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception &e) {
    throw FormatError(std::string("dataset is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("questions") || !doc["questions"].is_array()) {
    throw FormatError("qald-like dataset needs a \"questions\" array");
  }
  std::size_t index = 0;
  for (const auto &rec : doc["questions"]) {
    DatasetSample s;
    s.id = rec.contains("id") ? IdString(rec["id"]) : "";
    if (s.id.empty()) s.id = "#" + std::to_string(index);
    ++index;
    auto qs = rec.find("question");
    if (qs == rec.end() || !qs->is_array()) {
      throw FormatError("record " + s.id + ": missing question list");
    }
    for (const auto &q : *qs) {
      if (q.value("language", "") == "en") {
        s.question = NonEmptyString(q, "string");
        break;
      }
    }
    auto query = rec.find("query");
    if (query == rec.end() || !query->is_object()) {
      throw FormatError("record " + s.id + ": missing query");
    }
    if (s.question.empty()) {
      ds.quarantined.push_back({s.id, "no English question"});
      continue;
    }
    auto sparql = query->find("sparql");
    if (sparql == query->end() || !sparql->is_string()) {
      ds.quarantined.push_back({s.id, "query has no sparql text"});
      continue;
    }
    s.gold_sparql = sparql->get<std::string>();
    Admit(ds, std::move(s));
  }
  return ds;
}

Dataset LoadDataset(const std::string &path, DatasetFormat format) {
  return ParseDataset(ReadText(path), format);
}

std::string DatasetJson(const std::vector<DatasetSample> &samples) {
  json arr = json::array();
  for (const auto &s : samples) {
    arr.push_back({{"uid", s.id},
                   {"question", s.question},
                   {"sparql_wikidata", s.gold_sparql}});
  }
  return arr.dump(1) + "\n";
}

// ---------------------------------------------------------------------------
// Unknown-URI split.

UnknownUriSplit BuildUnknownUriSplit(const std::vector<DatasetSample> &samples,
                                     std::uint64_t seed,
                                     const SplitOptions &options) {
  const std::size_t n = samples.size();
  if (!(options.test_fraction > 0.0 && options.test_fraction < 1.0) ||
      !(options.valid_fraction >= 0.0 && options.valid_fraction < 1.0)) {
    throw Error("split fractions must be in [0, 1)");
  }

  std::map<UriRef, std::vector<std::size_t>> users;
  for (std::size_t i = 0; i < n; ++i) {
    UriSets u = ExtractUris(samples[i].gold_sparql);
    for (const auto &e : u.entities) users[e].push_back(i);
    for (const auto &r : u.relations) users[r].push_back(i);
  }
  std::vector<UriRef> order;
  for (const auto &[uri, _] : users) order.push_back(uri);
  std::mt19937_64 rng(seed);
  Shuffle(order, rng);
  std::stable_sort(order.begin(), order.end(), [&](const UriRef &a, const UriRef &b) {
    return users[a].size() < users[b].size();
  });

  const std::size_t target = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(options.test_fraction * n)));

  // Greedy pass; with `stop` unset it measures the largest reachable test set.
  auto greedy = [&](bool stop, std::vector<bool> &blocked,
                    std::vector<UriRef> &held) {
    std::size_t count = 0;
    for (const auto &uri : order) {
      if (stop && count >= target) break;
      std::size_t fresh = 0;
      for (std::size_t i : users[uri]) fresh += !blocked[i];
      if (n - count - fresh < 1) continue;  // train would be empty
      for (std::size_t i : users[uri]) blocked[i] = true;
      count += fresh;
      held.push_back(uri);
    }
    return count;
  };

  std::vector<bool> blocked(n, false);
  std::vector<UriRef> held;
  std::size_t test_count = greedy(true, blocked, held);
  if (test_count == 0) {
    std::vector<bool> b(n, false);
    std::vector<UriRef> h;
    throw InfeasibleSplit(greedy(false, b, h));
  }

  UnknownUriSplit out;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < n; ++i) {
    if (blocked[i]) {
      out.test.push_back(samples[i]);
      out.test.back().split = Split::kTest;
    } else {
      rest.push_back(i);
    }
  }
  Shuffle(rest, rng);
  std::size_t valid_count = std::min<std::size_t>(
      static_cast<std::size_t>(std::llround(options.valid_fraction * n)),
      rest.size() - 1);
  std::vector<std::size_t> valid(rest.begin(), rest.begin() + valid_count);
  std::vector<std::size_t> train(rest.begin() + valid_count, rest.end());
  std::sort(valid.begin(), valid.end());
  std::sort(train.begin(), train.end());
  for (std::size_t i : valid) {
    out.valid.push_back(samples[i]);
    out.valid.back().split = Split::kValid;
  }
  for (std::size_t i : train) {
    out.train.push_back(samples[i]);
    out.train.back().split = Split::kTrain;
  }
  std::sort(held.begin(), held.end());
  out.held_out = std::move(held);
  return out;
}

// ---------------------------------------------------------------------------
// Configuration.

namespace {

template <typename T>
void Get(const json &obj, const char *key, T &out) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception &e) {
    throw FormatError(std::string("config key ") + key + ": " + e.what());
  }
}

void RejectUnknown(const json &obj, std::initializer_list<const char *> keys,
                   const std::string &where) {
  if (!obj.is_object()) throw FormatError("config " + where + " must be an object");
  for (const auto &[k, _] : obj.items()) {
    bool known = false;
    for (const char *key : keys) known = known || k == key;
    if (!known) throw FormatError("unknown config key " + where + k);
  }
}

void EnvOverride(const char *name, std::string &field) {
  if (const char *v = std::getenv(name); v && *v) field = v;
}

}  // namespace

ExperimentConfig ExperimentConfig::FromJson(const json &j) {
  RejectUnknown(j,
                {"pipeline", "threshold", "k", "ablation_fraction", "memory_factor",
                 "seed", "restrict_to_label_ties", "workers", "shots", "shuffle_shots", "thresholds",
                 "factors", "latency_budget_ms", "probe_memory_size", "probes", "probe_dimension",
                 "paths", "embedder", "llm", "endpoint"},
                "");
  if (!j.contains("seed")) throw FormatError("config must set \"seed\"");
  ExperimentConfig c;
  std::string pipeline = PromptModeName(c.pipeline);
  Get(j, "pipeline", pipeline);
  auto mode = ParsePromptMode(pipeline);
  if (!mode) throw FormatError("unknown pipeline " + pipeline);
  c.pipeline = *mode;
  Get(j, "threshold", c.threshold);
  Get(j, "k", c.k);
  Get(j, "ablation_fraction", c.ablation_fraction);
  Get(j, "memory_factor", c.memory_factor);
  Get(j, "seed", c.seed);
  Get(j, "restrict_to_label_ties", c.restrict_to_label_ties);
  Get(j, "workers", c.workers);
  Get(j, "shots", c.shots);
  Get(j, "shuffle_shots", c.shuffle_shots);
  Get(j, "thresholds", c.thresholds);
  Get(j, "factors", c.factors);
  Get(j, "latency_budget_ms", c.latency_budget_ms);
  Get(j, "probe_memory_size", c.probe_memory_size);
  Get(j, "probes", c.probes);
  Get(j, "probe_dimension", c.probe_dimension);
  if (auto p = j.find("paths"); p != j.end()) {
    RejectUnknown(*p, {"entities", "relations", "dataset", "dataset_format",
                       "fixtures", "distractors", "shots_dataset", "output_dir"},
                  "paths.");
    Get(*p, "entities", c.paths.entities);
    Get(*p, "relations", c.paths.relations);
    Get(*p, "dataset", c.paths.dataset);
    Get(*p, "dataset_format", c.paths.dataset_format);
    Get(*p, "fixtures", c.paths.fixtures);
    Get(*p, "distractors", c.paths.distractors);
    Get(*p, "shots_dataset", c.paths.shots_dataset);
    Get(*p, "output_dir", c.paths.output_dir);
  }
  if (auto e = j.find("embedder"); e != j.end()) {
    RejectUnknown(*e, {"kind", "dimension", "seed", "base_url", "model", "api_key",
                       "timeout_ms", "batch_size"},
                  "embedder.");
    Get(*e, "kind", c.embedder.kind);
    Get(*e, "dimension", c.embedder.dimension);
    Get(*e, "seed", c.embedder.seed);
    Get(*e, "base_url", c.embedder.base_url);
    Get(*e, "model", c.embedder.model);
    Get(*e, "api_key", c.embedder.api_key);
    Get(*e, "timeout_ms", c.embedder.timeout_ms);
    Get(*e, "batch_size", c.embedder.batch_size);
  }
  if (auto l = j.find("llm"); l != j.end()) {
    RejectUnknown(*l, {"kind", "emulate_latency", "base_url", "model", "api_key",
                       "timeout_ms", "temperature", "max_tokens"},
                  "llm.");
    Get(*l, "kind", c.llm.kind);
    Get(*l, "emulate_latency", c.llm.emulate_latency);
    Get(*l, "base_url", c.llm.base_url);
    Get(*l, "model", c.llm.model);
    Get(*l, "api_key", c.llm.api_key);
    Get(*l, "timeout_ms", c.llm.timeout_ms);
    Get(*l, "temperature", c.llm.temperature);
    Get(*l, "max_tokens", c.llm.max_tokens);
  }
  if (auto ep = j.find("endpoint"); ep != j.end()) {
    RejectUnknown(*ep, {"enabled", "url", "timeout_ms", "min_interval_ms"},
                  "endpoint.");
    Get(*ep, "enabled", c.endpoint.enabled);
    Get(*ep, "url", c.endpoint.url);
    Get(*ep, "timeout_ms", c.endpoint.timeout_ms);
    Get(*ep, "min_interval_ms", c.endpoint.min_interval_ms);
  }
  c.Validate();
  return c;
}

json ExperimentConfig::ToJson() const {
  auto secret = [](const std::string &s) { return s.empty() ? "" : "<redacted>"; };
  return {
      {"pipeline", PromptModeName(pipeline)},
      {"threshold", threshold},
      {"k", k},
      {"ablation_fraction", ablation_fraction},
      {"memory_factor", memory_factor},
      {"seed", seed},
      {"restrict_to_label_ties", restrict_to_label_ties},
      {"workers", workers},
      {"shots", shots},
      {"shuffle_shots", shuffle_shots},
      {"thresholds", thresholds},
      {"factors", factors},
      {"latency_budget_ms", latency_budget_ms},
      {"probe_memory_size", probe_memory_size},
      {"probes", probes},
      {"probe_dimension", probe_dimension},
      {"paths",
       {{"entities", paths.entities},
        {"relations", paths.relations},
        {"dataset", paths.dataset},
        {"dataset_format", paths.dataset_format},
        {"fixtures", paths.fixtures},
        {"distractors", paths.distractors},
        {"shots_dataset", paths.shots_dataset},
        {"output_dir", paths.output_dir}}},
      {"embedder",
       {{"kind", embedder.kind},
        {"dimension", embedder.dimension},
        {"seed", embedder.seed},
        {"base_url", embedder.base_url},
        {"model", embedder.model},
        {"api_key", secret(embedder.api_key)},
        {"timeout_ms", embedder.timeout_ms},
        {"batch_size", embedder.batch_size}}},
      {"llm",
       {{"kind", llm.kind},
        {"emulate_latency", llm.emulate_latency},
        {"base_url", llm.base_url},
        {"model", llm.model},
        {"api_key", secret(llm.api_key)},
        {"timeout_ms", llm.timeout_ms},
        {"temperature", llm.temperature},
        {"max_tokens", llm.max_tokens}}},
      {"endpoint",
       {{"enabled", endpoint.enabled},
        {"url", endpoint.url},
        {"timeout_ms", endpoint.timeout_ms},
        {"min_interval_ms", endpoint.min_interval_ms}}},
  };
}

void ExperimentConfig::ApplyEnvironment() {
  EnvOverride("PGMR_LLM_BASE_URL", llm.base_url);
  EnvOverride("PGMR_LLM_API_KEY", llm.api_key);
  EnvOverride("PGMR_LLM_MODEL", llm.model);
  EnvOverride("PGMR_ENCODER_URL", embedder.base_url);
  EnvOverride("PGMR_ENCODER_API_KEY", embedder.api_key);
  EnvOverride("PGMR_SPARQL_ENDPOINT", endpoint.url);
}

void ExperimentConfig::Validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw FormatError("threshold must be in [0, 1]");
  for (double t : thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) throw FormatError("thresholds must be in [0, 1]");
  }
  if (k < 1) throw FormatError("k must be >= 1");
  if (workers < 1) throw FormatError("workers must be >= 1");
  if (!(ablation_fraction >= 0.0 && ablation_fraction <= 1.0)) {
    throw FormatError("ablation_fraction must be in [0, 1]");
  }
  if (memory_factor < 1 || memory_factor > 9) {
    throw FormatError("memory_factor must be in [1, 9]");
  }
  for (int f : factors) {
    if (f < 1 || f > 9) throw FormatError("factors must be in [1, 9]");
  }
  if (probe_dimension < 1) throw FormatError("probe_dimension must be >= 1");
  if (embedder.dimension < 1) throw FormatError("embedder.dimension must be >= 1");
  if (embedder.kind != "hashed" && embedder.kind != "http") {
    throw FormatError("embedder.kind must be hashed or http");
  }
  if (llm.kind != "replay" && llm.kind != "chat") {
    throw FormatError("llm.kind must be replay or chat");
  }
}

ExperimentConfig LoadConfig(const std::string &path) {
  json j;
  try {
    j = json::parse(ReadText(path));
  } catch (const json::exception &e) {
    throw FormatError(path + ": " + e.what());
  }
  ExperimentConfig c = ExperimentConfig::FromJson(j);
  c.ApplyEnvironment();
  return c;
}

std::unique_ptr<EmbeddingProvider> MakeEmbedder(const ExperimentConfig &config) {
  if (config.embedder.kind == "hashed") {
    return std::make_unique<HashedTrigramEmbedder>(config.embedder.dimension,
                                                   config.embedder.seed);
  }
  HttpEmbeddingConfig http;
  http.base_url = config.embedder.base_url;
  http.model = config.embedder.model;
  http.auth_token = config.embedder.api_key;
  http.dimension = config.embedder.dimension;
  http.batch_size = config.embedder.batch_size;
  http.timeout = std::chrono::milliseconds(config.embedder.timeout_ms);
  return std::make_unique<HttpEmbeddingClient>(http);
}

std::unique_ptr<GenerationProvider> MakeProvider(const ExperimentConfig &config) {
  if (config.llm.kind == "replay") {
    if (config.paths.fixtures.empty()) throw Error("replay needs paths.fixtures");
    return std::make_unique<ReplayProvider>(
        ReplayProvider::FromFile(config.paths.fixtures, config.llm.emulate_latency));
  }
  ChatCompletionsConfig chat;
  chat.base_url = config.llm.base_url;
  chat.model = config.llm.model;
  chat.api_key = config.llm.api_key;
  chat.timeout = std::chrono::milliseconds(config.llm.timeout_ms);
  chat.ApplyEnvironment();
  return std::make_unique<ChatCompletionsProvider>(chat);
}

std::unique_ptr<SparqlEndpointClient> MakeEndpoint(const ExperimentConfig &config) {
  if (!config.endpoint.enabled) return nullptr;
  SparqlEndpointConfig ep;
  ep.url = config.endpoint.url;
  ep.timeout = std::chrono::milliseconds(config.endpoint.timeout_ms);
  ep.min_interval = std::chrono::milliseconds(config.endpoint.min_interval_ms);
  return std::make_unique<HttpSparqlEndpoint>(ep);
}

Memory LoadMemoryFile(const std::string &path, UriKind kind,
                      const EmbeddingProvider &embedder) {
  std::string bytes = ReadText(path);
  Memory m = bytes.rfind("PGMRMEM1", 0) == 0 ? DeserializeSnapshot(bytes)
                                             : ParseMetadata(bytes, kind);
  if (m.kind() != kind) {
    throw Error(path + " holds a " + UriKindName(m.kind()) + " memory");
  }
  if (m.embedded_count() > 0 && m.dimension() != embedder.dimension()) {
    throw Error(path + " was embedded with dimension " +
                std::to_string(m.dimension()) + ", embedder has " +
                std::to_string(embedder.dimension()));
  }
  if (!m.embedded()) m = EmbedMemory(m, embedder, /*only_missing=*/true);
  return m;
}

// ---------------------------------------------------------------------------
// Pipelines.

std::vector<RetrievedUri> RagCandidates(std::string_view question,
                                        const PipelineContext &ctx) {
  const std::size_t k = ctx.spec.k;
  std::vector<std::pair<ScoredUri, const KgRecord *>> pool;
  for (const Memory *m : {ctx.entities, ctx.relations}) {
    for (const auto &s : RetrieveTopkForQuestion(question, *m, *ctx.embedder, k)) {
      pool.emplace_back(s, m->Find(s.uri));
    }
  }
  std::stable_sort(pool.begin(), pool.end(), [](const auto &a, const auto &b) {
    if (a.first.score != b.first.score) return a.first.score > b.first.score;
    if (a.first.uri.kind() != b.first.uri.kind()) return a.first.uri.is_entity();
    return a.first.uri.id() < b.first.uri.id();
  });
  if (pool.size() < k) {
    throw Error("memories hold fewer than k=" + std::to_string(k) + " records");
  }
  std::vector<RetrievedUri> out;
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back({pool[i].first.uri, pool[i].second->label, pool[i].second->description});
  }
  return out;
}

std::string PromptFor(std::string_view question, const PipelineContext &ctx) {
  if (ctx.spec.mode == PromptMode::kRag) {
    auto retrieved = RagCandidates(question, ctx);
    return BuildPrompt(ctx.spec, question, &retrieved);
  }
  return BuildPrompt(ctx.spec, question);
}

json SampleRecord::ToJson(bool with_timing) const {
  json j = {
      {"id", id},
      {"question", question},
      {"gold", gold},
      {"prompt_hash", prompt_hash},
      {"output", output},
      {"predicted", predicted},
      {"status", status},
      {"refused", refused},
      {"detail", detail},
      {"sqm", judgment.sqm_match},
      {"bleu", judgment.bleu},
      {"qid_em", judgment.qid_em},
      {"pid_em", judgment.pid_em},
      {"hallucinated", judgment.hallucinated},
      {"k", k()},
  };
  if (answer) {
    j["answer"] = {{"excluded", answer->excluded}, {"f1", answer->f1},
                   {"reason", answer->reason}};
  }
  if (with_timing) {
    j["timing"] = {{"t_generation", t_generation},
                   {"t_lookups", t_lookups},
                   {"t_pipeline", t_pipeline}};
  }
  return j;
}

TimingSummary SummarizeTiming(const std::vector<SampleRecord> &records) {
  TimingSummary t;
  if (records.empty()) return t;
  std::vector<double> gen, lookups, pipe, ks;
  for (const auto &r : records) {
    gen.push_back(r.t_generation);
    pipe.push_back(r.t_pipeline);
    ks.push_back(static_cast<double>(r.k()));
    lookups.insert(lookups.end(), r.t_lookups.begin(), r.t_lookups.end());
    ++t.k_histogram[r.k()];
  }
  t.t_generation_mean = Mean(gen);
  t.t_retrieval_mean = Mean(lookups);
  t.k_mean = Mean(ks);
  t.t_pipeline_mean = Mean(pipe);
  if (t.t_pipeline_mean > 0) {
    double predicted = t.t_generation_mean + t.k_mean * t.t_retrieval_mean;
    t.decomposition_error = std::abs(t.t_pipeline_mean - predicted) / t.t_pipeline_mean;
  }
  return t;
}

json EvalJson(const EvalReport &e) {
  json j = {{"n", e.n},
            {"sqm", e.sqm},
            {"bleu", e.bleu},
            {"qid_em", e.qid_em},
            {"pid_em", e.pid_em},
            {"uri_hallucination", e.uri_hallucination},
            {"refused", e.refused},
            {"malformed", e.malformed}};
  j["refusal_accuracy"] = e.refusal_accuracy ? json(*e.refusal_accuracy) : json();
  j["f1"] = e.f1 ? json(*e.f1) : json();
  j["f1_scored"] = e.f1_scored;
  j["f1_excluded"] = e.f1_excluded;
  return j;
}

namespace {

json TimingJson(const TimingSummary &t) {
  json hist = json::object();
  for (const auto &[k, c] : t.k_histogram) hist[std::to_string(k)] = c;
  return {{"t_generation_mean", t.t_generation_mean},
          {"t_retrieval_mean", t.t_retrieval_mean},
          {"k_mean", t.k_mean},
          {"t_pipeline_mean", t.t_pipeline_mean},
          {"decomposition_error", t.decomposition_error},
          {"k_histogram", hist}};
}

SampleRecord ProcessSample(const DatasetSample &sample, const PipelineContext &ctx,
                           double threshold) {
  SampleRecord rec;
  rec.id = sample.id;
  rec.question = sample.question;
  rec.gold = sample.gold_sparql;
  PredictionStatus prediction = PredictionStatus::kMalformed;

  auto start = Clock::now();
  try {
    std::string prompt = PromptFor(sample.question, ctx);
    rec.prompt_hash = Sha256Hex(prompt);
    auto gen_start = Clock::now();
    rec.output = ctx.provider->Generate(prompt, ctx.params);
    rec.t_generation = Since(gen_start);
    if (ctx.spec.mode == PromptMode::kPgmr) {
      std::optional<IntermediateQuery> iq;
      try {
        iq = ParsePgmr(rec.output);
      } catch (const MalformedOutput &e) {
        rec.status = "malformed";
        rec.detail = e.what();
      }
      if (iq) {
        GroundingOutcome g = GroundQuery(*iq, *ctx.entities, *ctx.relations,
                                         *ctx.embedder, threshold,
                                         ctx.retrieval);
        rec.t_lookups = std::move(g.lookup_seconds);
        rec.status = GroundingStatusName(g.status);
        rec.refused = std::move(g.refused);
        rec.detail = std::move(g.detail);
        rec.predicted = std::move(g.sparql);
        if (g.status == GroundingStatus::kGrounded) {
          prediction = PredictionStatus::kQuery;
        } else if (g.status == GroundingStatus::kRefusal) {
          prediction = PredictionStatus::kRefused;
        }
      }
    } else {
      rec.predicted = CleanOutput(rec.output);
      rec.status = "generated";
      prediction = PredictionStatus::kQuery;
    }
  } catch (const MissingFixture &) {
    throw;
  } catch (const Error &e) {
    rec.status = "error";
    rec.detail = e.what();
  }
  rec.t_pipeline = Since(start);

  rec.judgment = Judge(prediction, rec.predicted, rec.output, rec.gold,
                       *ctx.entities, *ctx.relations);
  if (ctx.endpoint != nullptr) {
    if (prediction == PredictionStatus::kQuery) {
      rec.answer = AnswerF1(rec.predicted, rec.gold, *ctx.endpoint);
    } else {
      QueryResult g = ctx.endpoint->Execute(rec.gold);
      rec.answer = AnswerScore{!g.ok, 0.0, g.ok ? "no query emitted" : g.error};
    }
  }
  return rec;
}

}  // namespace

json RunReport::SummaryJson() const {
  return {{"schema_version", kReportSchemaVersion},
          {"config", config},
          {"eval", EvalJson(eval)},
          {"timing", TimingJson(timing)}};
}

RunReport RunPipeline(const ExperimentConfig &config,
                      const std::vector<DatasetSample> &samples,
                      const PipelineContext &ctx) {
  if (!ctx.entities || !ctx.relations || !ctx.embedder || !ctx.provider) {
    throw Error("pipeline context is incomplete");
  }
  PipelineContext local = ctx;
  local.spec.mode = config.pipeline;
  local.spec.k = config.k;
  local.retrieval.restrict_to_label_ties = config.restrict_to_label_ties;

  RunReport report;
  report.config = config.ToJson();
  report.records.resize(samples.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < samples.size(); i = next++) {
      try {
        report.records[i] = ProcessSample(samples[i], local, config.threshold);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = samples.size();
      }
    }
  };
  std::size_t workers = std::min(std::max<std::size_t>(1, config.workers), samples.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto &t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<QueryPairJudgment> judgments;
  double f1_sum = 0.0;
  for (const auto &r : report.records) {
    judgments.push_back(r.judgment);
    if (!r.answer) continue;
    if (r.answer->excluded) {
      ++report.eval.f1_excluded;
    } else {
      f1_sum += r.answer->f1;
      ++report.eval.f1_scored;
    }
  }
  std::size_t scored = report.eval.f1_scored;
  std::size_t excluded = report.eval.f1_excluded;
  report.eval = Aggregate(judgments);
  report.eval.f1_scored = scored;
  report.eval.f1_excluded = excluded;
  if (scored > 0) report.eval.f1 = f1_sum / static_cast<double>(scored);
  report.timing = SummarizeTiming(report.records);
  return report;
}

// ---------------------------------------------------------------------------
// Experiment drivers.

json SweepReport::ToJson() const {
  json rows_json = json::array();
  for (const auto &r : rows) {
    rows_json.push_back(
        {{"ablation", r.ablation},
         {"threshold", r.threshold},
         {"refusal_accuracy", r.refusal_accuracy ? json(*r.refusal_accuracy) : json()},
         {"answerable_sqm", r.answerable_sqm},
         {"answerable", r.answerable},
         {"unanswerable", r.unanswerable},
         {"refused", r.refused}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"n", n},
          {"marked_threshold", marked_threshold},
          {"rows", rows_json}};
}

SweepReport RunRefusalSweep(const ExperimentConfig &config,
                            const std::vector<DatasetSample> &samples,
                            const PipelineContext &ctx) {
  if (!(config.ablation_fraction > 0.0 && config.ablation_fraction <= 1.0)) {
    throw Error("refusal sweep needs an ablation fraction in (0, 1]");
  }
  if (config.pipeline != PromptMode::kPgmr) {
    throw Error("refusal sweep runs the pgmr pipeline only");
  }
  PipelineContext local = ctx;
  local.spec.mode = PromptMode::kPgmr;
  local.retrieval.restrict_to_label_ties = config.restrict_to_label_ties;

  // Generation does not depend on the memories or the threshold.
  std::vector<std::optional<IntermediateQuery>> generated;
  generated.reserve(samples.size());
  for (const auto &s : samples) {
    std::optional<IntermediateQuery> iq;
    try {
      iq = ParsePgmr(local.provider->Generate(PromptFor(s.question, local), local.params));
    } catch (const MalformedOutput &) {
    } catch (const TransportError &) {
    }
    generated.push_back(std::move(iq));
  }

  Ablation ablation = Ablate(*ctx.entities, config.ablation_fraction, config.seed);
  std::vector<bool> answerable;
  for (const auto &s : samples) {
    bool ok = true;
    for (const auto &e : ExtractUris(s.gold_sparql).entities) {
      ok = ok && ablation.memory.Contains(e);
    }
    answerable.push_back(ok);
  }

  SweepReport report;
  report.n = samples.size();
  for (double t : config.thresholds) {
    std::vector<RefusalItem> items;
    std::vector<bool> match;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      GroundingStatus status = GroundingStatus::kMalformed;
      bool sqm = false;
      if (generated[i]) {
        GroundingOutcome g = GroundQuery(*generated[i], ablation.memory,
                                         *ctx.relations, *ctx.embedder, t,
                                         local.retrieval);
        status = g.status;
        sqm = g.status == GroundingStatus::kGrounded &&
              Sqm(g.sparql, samples[i].gold_sparql);
      }
      items.push_back({status, answerable[i]});
      match.push_back(sqm);
    }
    RefusalSummary summary = RefusalAccuracy(items);
    SweepRow row;
    row.ablation = config.ablation_fraction;
    row.threshold = t;
    row.refusal_accuracy = summary.refusal_accuracy;
    row.answerable = summary.answerable.size();
    row.unanswerable = summary.unanswerable;
    std::size_t hits = 0;
    for (std::size_t i : summary.answerable) hits += match[i];
    row.answerable_sqm =
        row.answerable ? 100.0 * hits / static_cast<double>(row.answerable) : 0.0;
    for (const auto &it : items) row.refused += it.status == GroundingStatus::kRefusal;
    report.rows.push_back(row);
  }
  return report;
}

json ScalingReport::ToJson() const {
  json rows_json = json::array();
  for (const auto &r : rows) {
    rows_json.push_back(
        {{"factor", r.factor}, {"memory_size", r.memory_size}, {"eval", EvalJson(r.eval)}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"baseline", EvalJson(baseline.eval)},
          {"factor1_matches_baseline", factor1_matches_baseline},
          {"rows", rows_json}};
}

ScalingReport RunMemoryScaling(const ExperimentConfig &config,
                               const std::vector<DatasetSample> &samples,
                               const PipelineContext &ctx,
                               const std::vector<KgRecord> &distractors) {
  int max_factor = 1;
  for (int f : config.factors) max_factor = std::max(max_factor, f);
  std::size_t needed = ctx.entities->size() * static_cast<std::size_t>(max_factor - 1);
  if (distractors.size() < needed) {
    throw Error("distractor pool has " + std::to_string(distractors.size()) +
                " records, factor " + std::to_string(max_factor) + " needs " +
                std::to_string(needed));
  }
  for (std::size_t i = 0; i < needed; ++i) {
    if (!distractors[i].embedding) {
      throw Error("distractor " + distractors[i].uri.canonical_text() +
                  " has no embedding");
    }
  }

  auto strip = [](const RunReport &r) {
    std::vector<json> out;
    for (const auto &rec : r.records) out.push_back(rec.ToJson(false));
    return out;
  };

  ScalingReport report;
  report.baseline = RunPipeline(config, samples, ctx);
  const auto baseline_records = strip(report.baseline);
  for (int f : config.factors) {
    Memory scaled = AugmentWithDistractors(*ctx.entities, distractors, f);
    PipelineContext local = ctx;
    local.entities = &scaled;
    RunReport run = RunPipeline(config, samples, local);
    if (f == 1) report.factor1_matches_baseline = strip(run) == baseline_records;
    report.rows.push_back({f, scaled.size(), run.eval});
  }
  return report;
}

json LatencyReport::ToJson() const {
  return {{"schema_version", kReportSchemaVersion},
          {"n", n},
          {"timing", TimingJson(timing)},
          {"zero_k", zero_k},
          {"zero_k_pipeline_mean", zero_k_pipeline_mean},
          {"zero_k_generation_mean", zero_k_generation_mean}};
}

LatencyReport MeasureLatency(const ExperimentConfig &config,
                             const std::vector<DatasetSample> &samples,
                             const PipelineContext &ctx) {
  ExperimentConfig serial = config;
  serial.workers = 1;
  RunReport run = RunPipeline(serial, samples, ctx);
  LatencyReport report;
  report.n = run.records.size();
  report.timing = run.timing;
  std::vector<double> pipe, gen;
  for (const auto &r : run.records) {
    if (r.k() != 0) continue;
    pipe.push_back(r.t_pipeline);
    gen.push_back(r.t_generation);
  }
  report.zero_k = pipe.size();
  report.zero_k_pipeline_mean = Mean(pipe);
  report.zero_k_generation_mean = Mean(gen);
  return report;
}

json ProbeReport::ToJson() const {
  return {{"schema_version", kReportSchemaVersion},
          {"memory_size", memory_size},
          {"dimension", dimension},
          {"probes", probes},
          {"median_ms", median_ms},
          {"p90_ms", p90_ms},
          {"mean_ms", mean_ms},
          {"budget_ms", budget_ms},
          {"within_budget", within_budget}};
}

ProbeReport ProbeRetrievalLatency(const Memory &memory,
                                  const EmbeddingProvider &embedder,
                                  const std::vector<PlaceholderBinding> &probes,
                                  double budget_ms) {
  ProbeReport report;
  report.memory_size = memory.size();
  report.dimension = memory.dimension();
  report.budget_ms = budget_ms;
  std::vector<double> ms;
  for (const auto &b : probes) {
    auto start = Clock::now();
    RetrievalResult r = Retrieve(b, memory, embedder, 0.0);
    ms.push_back(1000.0 * Since(start));
    if (r.method == RetrievalMethod::kExactLabel) {
      throw Error("probe label \"" + b.label + "\" matched a record exactly");
    }
  }
  report.probes = ms.size();
  if (ms.empty()) return report;
  report.mean_ms = Mean(ms);
  std::sort(ms.begin(), ms.end());
  report.median_ms = ms.size() % 2 ? ms[ms.size() / 2]
                                   : 0.5 * (ms[ms.size() / 2 - 1] + ms[ms.size() / 2]);
  report.p90_ms = ms[std::min(ms.size() - 1, ms.size() * 9 / 10)];
  report.within_budget = report.median_ms <= budget_ms;
  return report;
}

// ---------------------------------------------------------------------------
// Fixtures and dataset transformation.

std::vector<FixtureEntry> BuildOracleFixtures(
    const std::vector<DatasetSample> &samples, const PipelineContext &ctx,
    const OracleOptions &options) {
  std::mt19937_64 rng(options.seed);
  std::vector<FixtureEntry> out;
  for (const auto &s : samples) {
    FixtureEntry e;
    e.prompt = PromptFor(s.question, ctx);
    e.prompt_hash = Sha256Hex(e.prompt);
    if (ctx.spec.mode == PromptMode::kPgmr) {
      try {
        IntermediateQuery iq =
            SparqlToPgmr(s.gold_sparql, *ctx.entities, *ctx.relations).query;
        for (auto &b : iq.bindings) {
          double u = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
          if (u < options.label_noise) b.label = PerturbLabel(b.label, rng);
        }
        e.output = RenderPgmr(iq);
      } catch (const UnknownUri &) {
        e.output = CollapseWhitespace(s.gold_sparql);
      }
    } else {
      e.output = s.gold_sparql;
    }
    if (options.latency_ms > 0) e.latency_ms = options.latency_ms;
    out.push_back(std::move(e));
  }
  return out;
}

TransformedDataset TransformDataset(const std::vector<DatasetSample> &samples,
                                    const Memory &entities,
                                    const Memory &relations) {
  TransformedDataset out;
  for (const auto &s : samples) {
    try {
      PgmrConversion conv = SparqlToPgmr(s.gold_sparql, entities, relations);
      out.records.push_back({{"id", s.id},
                             {"question", s.question},
                             {"pgmr_text", RenderPgmr(conv.query)},
                             {"gold_sparql", s.gold_sparql}});
    } catch (const UnknownUri &e) {
      out.skipped.push_back({s.id, e.what()});
    }
  }
  return out;
}

std::vector<Shot> BuildShots(const std::vector<DatasetSample> &samples,
                             std::size_t count, PromptMode mode,
                             const Memory &entities, const Memory &relations,
                             std::optional<std::uint64_t> shuffle_seed) {
  std::vector<const DatasetSample *> order;
  for (const auto &s : samples) order.push_back(&s);
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    Shuffle(order, rng);
  }
  std::vector<Shot> shots;
  for (const DatasetSample *s : order) {
    if (shots.size() >= count) break;
    if (mode != PromptMode::kPgmr) {
      shots.push_back({s->question, CollapseWhitespace(s->gold_sparql)});
      continue;
    }
    try {
      shots.push_back(
          {s->question, RenderPgmr(SparqlToPgmr(s->gold_sparql, entities, relations).query)});
    } catch (const UnknownUri &) {
    }
  }
  return shots;
}

// ---------------------------------------------------------------------------
// Output.

void WriteText(const std::string &path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("cannot write " + path);
}

std::string ReadText(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteJsonl(const std::string &path, const std::vector<json> &rows) {
  std::string out;
  for (const auto &r : rows) {
    out += r.dump();
    out += '\n';
  }
  WriteText(path, out);
}

void WriteJson(const std::string &path, const json &doc) {
  WriteText(path, doc.dump(2) + "\n");
}

}  // namespace pgmr
