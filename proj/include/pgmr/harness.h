#ifndef PGMR_HARNESS_H_
#define PGMR_HARNESS_H_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgmr/embedding.h"
#include "pgmr/error.h"
#include "pgmr/generation.h"
#include "pgmr/kg_store.h"
#include "pgmr/metrics.h"
#include "pgmr/retrieval.h"

namespace pgmr {

// ---------------------------------------------------------------------------
// Datasets.

enum class Split { kTrain, kValid, kTest };
const char *SplitName(Split split);

struct DatasetSample {
  std::string id;
  std::string question;
  std::string gold_sparql;
  Split split = Split::kTrain;
};

// lcquad2-like: a JSON array (or JSON lines) of objects with uid, question
// (falling back to paraphrased_question, then NNQT_question) and
// sparql_wikidata. qald-like: {"questions": [{id, question: [{language,
// string}], query: {sparql}}]}, English only.
enum class DatasetFormat { kLcquad2, kQald };
std::optional<DatasetFormat> ParseDatasetFormat(std::string_view name);

struct QuarantinedSample {
  std::string id;
  std::string reason;
};

struct Dataset {
  std::vector<DatasetSample> samples;
  std::vector<QuarantinedSample> quarantined;
};

// Samples whose gold query does not parse are quarantined. Records missing
// required fields throw FormatError naming the record.
Dataset LoadDataset(const std::string &path, DatasetFormat format);
Dataset ParseDataset(std::string_view contents, DatasetFormat format);

// Writes samples in the lcquad2-like format.
std::string DatasetJson(const std::vector<DatasetSample> &samples);

// ---------------------------------------------------------------------------
// Unknown-URI split.

struct SplitOptions {
  double test_fraction = 0.1;
  double valid_fraction = 0.1;
};

struct UnknownUriSplit {
  std::vector<DatasetSample> train;
  std::vector<DatasetSample> valid;
  std::vector<DatasetSample> test;
  std::vector<UriRef> held_out;  // URIs that never occur in train
};

class InfeasibleSplit : public Error {
 public:
  explicit InfeasibleSplit(std::size_t max_test)
      : Error("no valid unknown-URI split: at most " + std::to_string(max_test) +
              " test samples can be formed"),
        max_test_(max_test) {}
  std::size_t max_test_size() const { return max_test_; }

 private:
  std::size_t max_test_;
};

// Holds out URIs greedily, rarest first (ties shuffled by `seed`), never
// leaving train empty, until the samples using held-out URIs reach the
// test fraction. Those samples form the test set, so each has a URI
// absent from train; the rest are shuffled into valid and train.
UnknownUriSplit BuildUnknownUriSplit(const std::vector<DatasetSample> &samples,
                                     std::uint64_t seed,
                                     const SplitOptions &options = {});

// ---------------------------------------------------------------------------
// Configuration.

struct ExperimentConfig {
  PromptMode pipeline = PromptMode::kPgmr;
  double threshold = kDefaultThreshold;
  std::size_t k = 10;
  double ablation_fraction = 0.3;
  int memory_factor = 1;
  std::uint64_t seed = 0;
  bool restrict_to_label_ties = false;
  std::size_t workers = 1;
  std::size_t shots = 0;
  bool shuffle_shots = false;  // exemplars in seeded random order
  std::vector<double> thresholds = {0.0,  0.5, 0.55, 0.6, 0.65, 0.7,
                                    0.75, 0.8, 0.85, 0.9, 0.95};
  std::vector<int> factors = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  double latency_budget_ms = 5.0;
  std::size_t probe_memory_size = 100000;
  std::size_t probes = 1000;
  int probe_dimension = 64;  // hashed embedder used by the latency probe

  struct Paths {
    std::string entities;
    std::string relations;
    std::string dataset;
    std::string dataset_format = "lcquad2";
    std::string fixtures;
    std::string distractors;
    std::string shots_dataset;  // exemplars are drawn from here
    std::string output_dir = "out";
  } paths;

  struct Embedder {
    std::string kind = "hashed";  // hashed | http
    int dimension = 256;
    std::uint64_t seed = 0;
    std::string base_url;
    std::string model;
    std::string api_key;
    int timeout_ms = 30000;
    std::size_t batch_size = 32;
  } embedder;

  struct Llm {
    std::string kind = "replay";  // replay | chat
    bool emulate_latency = false;
    std::string base_url;
    std::string model;
    std::string api_key;
    int timeout_ms = 60000;
    double temperature = 0.0;
    int max_tokens = 512;
  } llm;

  struct Endpoint {
    bool enabled = false;
    std::string url;
    int timeout_ms = 30000;
    int min_interval_ms = 0;
  } endpoint;

  // `seed` is required; unknown keys are rejected.
  static ExperimentConfig FromJson(const nlohmann::json &j);
  nlohmann::json ToJson() const;

  // PGMR_LLM_BASE_URL, PGMR_LLM_API_KEY, PGMR_LLM_MODEL,
  // PGMR_ENCODER_URL, PGMR_ENCODER_API_KEY, PGMR_SPARQL_ENDPOINT.
  void ApplyEnvironment();

  // Range checks shared by the drivers.
  void Validate() const;
};

ExperimentConfig LoadConfig(const std::string &path);

std::unique_ptr<EmbeddingProvider> MakeEmbedder(const ExperimentConfig &config);
std::unique_ptr<GenerationProvider> MakeProvider(const ExperimentConfig &config);
// Null unless the endpoint is enabled.
std::unique_ptr<SparqlEndpointClient> MakeEndpoint(const ExperimentConfig &config);

// Reads a snapshot or a metadata file and embeds the records that lack an
// embedding.
Memory LoadMemoryFile(const std::string &path, UriKind kind,
                      const EmbeddingProvider &embedder);

// ---------------------------------------------------------------------------
// Pipelines.

struct PipelineContext {
  const Memory *entities = nullptr;
  const Memory *relations = nullptr;
  const EmbeddingProvider *embedder = nullptr;
  const GenerationProvider *provider = nullptr;
  PromptSpec spec;
  GenerationParams params;
  RetrievalOptions retrieval;
  const SparqlEndpointClient *endpoint = nullptr;  // answer F1 when set
};

// Candidate URIs for a RAG prompt: the k best records of both memories.
std::vector<RetrievedUri> RagCandidates(std::string_view question,
                                        const PipelineContext &ctx);

// The prompt the pipeline sends for `question`.
std::string PromptFor(std::string_view question, const PipelineContext &ctx);

struct SampleRecord {
  std::string id;
  std::string question;
  std::string gold;
  std::string prompt_hash;
  std::string output;
  std::string predicted;  // grounded or generated SPARQL
  std::string status;     // generated | grounded | refused | malformed | error
  std::vector<std::string> refused;
  std::string detail;
  QueryPairJudgment judgment;
  std::optional<AnswerScore> answer;

  double t_generation = 0.0;  // seconds
  std::vector<double> t_lookups;
  double t_pipeline = 0.0;  // generation + parsing + grounding

  std::size_t k() const { return t_lookups.size(); }

  // Timing fields are written under "timing" unless `with_timing` is false.
  nlohmann::json ToJson(bool with_timing = true) const;
};

struct TimingSummary {
  double t_generation_mean = 0.0;
  double t_retrieval_mean = 0.0;  // per lookup
  double k_mean = 0.0;
  double t_pipeline_mean = 0.0;
  // |t_pipeline_mean - (t_generation_mean + k_mean * t_retrieval_mean)| /
  // t_pipeline_mean
  double decomposition_error = 0.0;
  std::map<std::size_t, std::size_t> k_histogram;
};

TimingSummary SummarizeTiming(const std::vector<SampleRecord> &records);

struct RunReport {
  nlohmann::json config;
  EvalReport eval;
  TimingSummary timing;
  std::vector<SampleRecord> records;

  nlohmann::json SummaryJson() const;
};

nlohmann::json EvalJson(const EvalReport &eval);

// Runs the configured pipeline over `samples`. Per-sample transport
// failures are recorded as status "error"; a missing replay fixture aborts
// the run.
RunReport RunPipeline(const ExperimentConfig &config,
                      const std::vector<DatasetSample> &samples,
                      const PipelineContext &ctx);

// ---------------------------------------------------------------------------
// Experiment drivers.

struct SweepRow {
  double ablation = 0.0;
  double threshold = 0.0;
  std::optional<double> refusal_accuracy;
  double answerable_sqm = 0.0;
  std::size_t answerable = 0;
  std::size_t unanswerable = 0;
  std::size_t refused = 0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::size_t n = 0;
  double marked_threshold = kDefaultThreshold;
  nlohmann::json ToJson() const;
};

// Ablates the entity memory by config.ablation_fraction (seeded by
// config.seed) and grounds the cached PGMR generations at every threshold.
// A sample is answerable iff all its gold entity URIs survive.
SweepReport RunRefusalSweep(const ExperimentConfig &config,
                            const std::vector<DatasetSample> &samples,
                            const PipelineContext &ctx);

struct ScalingRow {
  int factor = 1;
  std::size_t memory_size = 0;
  EvalReport eval;
};

struct ScalingReport {
  std::vector<ScalingRow> rows;
  RunReport baseline;
  bool factor1_matches_baseline = false;
  nlohmann::json ToJson() const;
};

// Runs the pipeline with the entity memory grown to each factor using the
// leading records of `distractors` (which must carry embeddings). The
// relation memory is not scaled.
ScalingReport RunMemoryScaling(const ExperimentConfig &config,
                               const std::vector<DatasetSample> &samples,
                               const PipelineContext &ctx,
                               const std::vector<KgRecord> &distractors);

struct LatencyReport {
  TimingSummary timing;
  std::size_t n = 0;
  double zero_k_pipeline_mean = 0.0;
  double zero_k_generation_mean = 0.0;
  std::size_t zero_k = 0;
  nlohmann::json ToJson() const;
};

LatencyReport MeasureLatency(const ExperimentConfig &config,
                             const std::vector<DatasetSample> &samples,
                             const PipelineContext &ctx);

struct ProbeReport {
  std::size_t memory_size = 0;
  int dimension = 0;
  std::size_t probes = 0;
  double median_ms = 0.0;
  double p90_ms = 0.0;
  double mean_ms = 0.0;
  double budget_ms = 0.0;
  bool within_budget = false;
  nlohmann::json ToJson() const;
};

// Times the embedding stage of the retriever: each probe label is absent
// from the memory so every lookup embeds and scans.
ProbeReport ProbeRetrievalLatency(const Memory &memory,
                                  const EmbeddingProvider &embedder,
                                  const std::vector<PlaceholderBinding> &probes,
                                  double budget_ms);

// ---------------------------------------------------------------------------
// Fixtures and dataset transformation.

struct OracleOptions {
  double label_noise = 0.0;  // share of bindings whose label gets a typo
  std::uint64_t seed = 0;
  double latency_ms = 0.0;   // recorded with every entry
};

// Fixture entries whose outputs are the gold answers: the rendered
// intermediate query for Pgmr (with optional label typos), the gold SPARQL
// otherwise. Gold queries with URIs lacking metadata are emitted as plain
// templates.
std::vector<FixtureEntry> BuildOracleFixtures(
    const std::vector<DatasetSample> &samples, const PipelineContext &ctx,
    const OracleOptions &options);

struct TransformedDataset {
  std::vector<nlohmann::json> records;  // {id, question, pgmr_text, gold_sparql}
  std::vector<QuarantinedSample> skipped;
};

TransformedDataset TransformDataset(const std::vector<DatasetSample> &samples,
                                    const Memory &entities,
                                    const Memory &relations);

// The first `count` samples (in dataset order, or shuffled with
// `shuffle_seed`) as exemplars for `mode`; samples that cannot be
// transformed are skipped.
std::vector<Shot> BuildShots(const std::vector<DatasetSample> &samples,
                             std::size_t count, PromptMode mode,
                             const Memory &entities, const Memory &relations,
                             std::optional<std::uint64_t> shuffle_seed = std::nullopt);

// ---------------------------------------------------------------------------
// Output.

void WriteJsonl(const std::string &path, const std::vector<nlohmann::json> &rows);
void WriteJson(const std::string &path, const nlohmann::json &doc);
void WriteText(const std::string &path, std::string_view text);
std::string ReadText(const std::string &path);

constexpr int kReportSchemaVersion = 1;

}  // namespace pgmr

#endif  // PGMR_HARNESS_H_
