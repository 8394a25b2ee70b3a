// pgmr: dataset transformation, memory building and the experiment drivers.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <cstdlib>
#include <nlohmann/json.hpp>

#include "pgmr/embedding.h"
#include "pgmr/error.h"
#include "pgmr/generation.h"
#include "pgmr/harness.h"
#include "pgmr/kg_store.h"
#include "pgmr/synthetic.h"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace pgmr;

namespace {

DatasetFormat FormatOrDie(const std::string &name) {
  auto f = ParseDatasetFormat(name);
  if (!f) throw Error("unknown dataset format " + name + " (lcquad2 or qald)");
  return *f;
}

UriKind KindOrDie(const std::string &name) {
  if (name == "entity" || name == "entities") return UriKind::kEntity;
  if (name == "relation" || name == "relations") return UriKind::kRelation;
  throw Error("unknown memory kind " + name + " (entity or relation)");
}

void ReportQuarantine(const Dataset &ds) {
  for (const auto &q : ds.quarantined) {
    std::cerr << "quarantined " << q.id << ": " << q.reason << "\n";
  }
}

// Flags shared by the config-driven commands. Each mirrors a config key.
struct Overrides {
  std::string config_path;
  std::optional<std::string> pipeline;
  std::optional<double> threshold;
  std::optional<std::size_t> k;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> shots;
  std::optional<double> ablation;
  std::optional<std::string> dataset;
  std::optional<std::string> fixtures;
  std::optional<std::string> output_dir;
  bool emulate_latency = false;

  void Register(CLI::App *cmd) {
    cmd->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
    cmd->add_option("--pipeline", pipeline, "direct | rag | pgmr");
    cmd->add_option("--threshold", threshold, "refusal threshold");
    cmd->add_option("--k", k, "retrieved URIs per RAG prompt");
    cmd->add_option("--seed", seed, "experiment seed");
    cmd->add_option("--workers", workers, "parallel samples");
    cmd->add_option("--shots", shots, "few-shot exemplars");
    cmd->add_option("--ablation", ablation, "entity ablation fraction");
    cmd->add_option("--dataset", dataset, "evaluation dataset path");
    cmd->add_option("--fixtures", fixtures, "replay fixture path");
    cmd->add_option("--output-dir", output_dir, "report directory");
    cmd->add_flag("--emulate-latency", emulate_latency, "sleep for recorded latencies");
  }

  ExperimentConfig Load() const {
    ExperimentConfig c = LoadConfig(config_path);
    if (pipeline) {
      auto m = ParsePromptMode(*pipeline);
      if (!m) throw Error("unknown pipeline " + *pipeline);
      c.pipeline = *m;
    }
    if (threshold) c.threshold = *threshold;
    if (k) c.k = *k;
    if (seed) c.seed = *seed;
    if (workers) c.workers = *workers;
    if (shots) c.shots = *shots;
    if (ablation) c.ablation_fraction = *ablation;
    if (dataset) c.paths.dataset = *dataset;
    if (fixtures) c.paths.fixtures = *fixtures;
    if (output_dir) c.paths.output_dir = *output_dir;
    if (emulate_latency) c.llm.emulate_latency = true;
    c.Validate();
    return c;
  }
};

// Everything a driver needs, loaded from the config.
struct Setup {
  ExperimentConfig config;
  std::unique_ptr<EmbeddingProvider> embedder;
  Memory entities;
  Memory relations;
  std::vector<DatasetSample> samples;
  std::unique_ptr<GenerationProvider> provider;
  std::unique_ptr<SparqlEndpointClient> endpoint;
  PipelineContext ctx;

  explicit Setup(ExperimentConfig c, bool need_provider = true)
      : config(std::move(c)) {
    embedder = MakeEmbedder(config);
    entities = LoadMemoryFile(config.paths.entities, UriKind::kEntity, *embedder);
    relations = LoadMemoryFile(config.paths.relations, UriKind::kRelation, *embedder);
    Dataset ds = LoadDataset(config.paths.dataset, FormatOrDie(config.paths.dataset_format));
    ReportQuarantine(ds);
    samples = std::move(ds.samples);
    if (need_provider) provider = MakeProvider(config);
    endpoint = MakeEndpoint(config);

    ctx.entities = &entities;
    ctx.relations = &relations;
    ctx.embedder = embedder.get();
    ctx.provider = provider.get();
    ctx.endpoint = endpoint.get();
    ctx.spec.mode = config.pipeline;
    ctx.spec.k = config.k;
    ctx.params.temperature = config.llm.temperature;
    ctx.params.max_tokens = config.llm.max_tokens;
    ctx.retrieval.restrict_to_label_ties = config.restrict_to_label_ties;
    if (config.shots > 0) {
      if (config.paths.shots_dataset.empty()) {
        throw Error("shots > 0 needs paths.shots_dataset");
      }
      Dataset train = LoadDataset(config.paths.shots_dataset,
                                  FormatOrDie(config.paths.dataset_format));
      std::optional<std::uint64_t> shuffle;
      if (config.shuffle_shots) shuffle = config.seed;
      ctx.spec.shots = BuildShots(train.samples, config.shots, config.pipeline,
                                  entities, relations, shuffle);
    }
  }

  std::string Out(const std::string &name) const {
    fs::create_directories(config.paths.output_dir);
    return (fs::path(config.paths.output_dir) / name).string();
  }
};

void PrintEval(const EvalReport &e) {
  std::cout << EvalJson(e).dump(2) << "\n";
}

std::vector<KgRecord> DistractorPool(const Setup &s) {
  int max_factor = 1;
  for (int f : s.config.factors) max_factor = std::max(max_factor, f);
  std::size_t needed = s.entities.size() * static_cast<std::size_t>(max_factor - 1);
  Memory pool;
  if (!s.config.paths.distractors.empty()) {
    pool = LoadMemoryFile(s.config.paths.distractors, UriKind::kEntity, *s.embedder);
  } else {
    std::uint64_t first = 1;
    for (const auto &r : s.entities.records()) first = std::max(first, r.uri.id() + 1);
    pool = EmbedMemory(
        Memory::FromRecords(UriKind::kEntity,
                            GenerateDistractors(UriKind::kEntity, needed,
                                                first + 1000000, s.config.seed)),
        *s.embedder);
  }
  return pool.records();
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"PGMR pipeline: transformation, grounding and evaluation"};
  app.require_subcommand(1);

  // transform
  std::string t_dataset, t_format = "lcquad2", t_entities, t_relations, t_out;
  auto *transform = app.add_subcommand("transform", "write {question, pgmr_text, gold_sparql} lines");
  transform->add_option("--dataset", t_dataset)->required();
  transform->add_option("--format", t_format);
  transform->add_option("--entities", t_entities)->required();
  transform->add_option("--relations", t_relations)->required();
  transform->add_option("--out", t_out)->required();

  // build-memory / embed-memory
  std::string m_input, m_kind = "entity", m_out, m_embedder = "hashed", m_url, m_model;
  int m_dim = 256;
  std::uint64_t m_seed = 0;
  auto *build = app.add_subcommand("build-memory", "metadata file to memory snapshot");
  build->add_option("--input", m_input)->required();
  build->add_option("--kind", m_kind);
  build->add_option("--out", m_out)->required();
  auto *embed = app.add_subcommand("embed-memory", "embed a memory and write a snapshot");
  embed->add_option("--input", m_input, "snapshot or metadata file")->required();
  embed->add_option("--kind", m_kind);
  embed->add_option("--out", m_out)->required();
  embed->add_option("--embedder", m_embedder, "hashed | http");
  embed->add_option("--dimension", m_dim);
  embed->add_option("--seed", m_seed, "hashed embedder seed");
  embed->add_option("--encoder-url", m_url);
  embed->add_option("--encoder-model", m_model);

  // split-unknown-uri
  std::string s_dataset, s_format = "lcquad2", s_out;
  std::uint64_t s_seed = 0;
  SplitOptions s_options;
  auto *split = app.add_subcommand("split-unknown-uri", "train/valid/test with unseen test URIs");
  split->add_option("--dataset", s_dataset)->required();
  split->add_option("--format", s_format);
  split->add_option("--seed", s_seed)->required();
  split->add_option("--test-fraction", s_options.test_fraction);
  split->add_option("--valid-fraction", s_options.valid_fraction);
  split->add_option("--out-dir", s_out)->required();

  Overrides run_o, sweep_o, scale_o, latency_o, record_o;
  auto *run = app.add_subcommand("run", "run a pipeline and evaluate it");
  run_o.Register(run);
  auto *sweep = app.add_subcommand("refusal-sweep", "refusal accuracy / answerable SQM per threshold");
  sweep_o.Register(sweep);
  auto *scale = app.add_subcommand("memory-scale", "SQM as the entity memory grows");
  scale_o.Register(scale);
  auto *latency = app.add_subcommand("latency", "latency decomposition and retrieval probe");
  latency_o.Register(latency);
  bool skip_probe = false;
  latency->add_flag("--skip-probe", skip_probe, "skip the large-memory probe");
  auto *record = app.add_subcommand("record-fixtures", "record generation outputs for replay");
  record_o.Register(record);
  bool oracle = false;
  double noise = 0.0, oracle_latency = 0.0;
  record->add_flag("--oracle", oracle, "write gold answers instead of calling the model");
  record->add_option("--label-noise", noise, "oracle: share of labels with a typo");
  record->add_option("--latency-ms", oracle_latency, "oracle: recorded latency");

  // synth
  std::string y_out;
  SyntheticKgOptions y_kg;
  std::size_t y_samples = 1000;
  auto *synth = app.add_subcommand("synth", "write a synthetic KG, dataset and config");
  synth->add_option("--out-dir", y_out)->required();
  synth->add_option("--entities", y_kg.entities);
  synth->add_option("--relations", y_kg.relations);
  synth->add_option("--samples", y_samples);
  synth->add_option("--seed", y_kg.seed);
  synth->add_option("--duplicate-labels", y_kg.duplicate_label_fraction);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*transform) {
      Memory ents = ParseMetadata(ReadText(t_entities), UriKind::kEntity);
      Memory rels = ParseMetadata(ReadText(t_relations), UriKind::kRelation);
      Dataset ds = LoadDataset(t_dataset, FormatOrDie(t_format));
      ReportQuarantine(ds);
      TransformedDataset out = TransformDataset(ds.samples, ents, rels);
      for (const auto &s : out.skipped) std::cerr << "skipped " << s.id << ": " << s.reason << "\n";
      WriteJsonl(t_out, out.records);
      std::cout << out.records.size() << " transformed, " << out.skipped.size()
                << " skipped, " << ds.quarantined.size() << " quarantined\n";
    } else if (*build) {
      Memory m = LoadMetadata(m_input, KindOrDie(m_kind));
      SaveSnapshot(m, m_out);
      std::cout << m.size() << " records\n";
    } else if (*embed) {
      std::unique_ptr<EmbeddingProvider> e;
      if (m_embedder == "hashed") {
        e = std::make_unique<HashedTrigramEmbedder>(m_dim, m_seed);
      } else {
        HttpEmbeddingConfig hc;
        hc.base_url = m_url;
        hc.model = m_model;
        hc.dimension = m_dim;
        if (const char *v = std::getenv("PGMR_ENCODER_URL"); v && *v) hc.base_url = v;
        if (const char *v = std::getenv("PGMR_ENCODER_API_KEY"); v && *v) hc.auth_token = v;
        e = std::make_unique<HttpEmbeddingClient>(hc);
      }
      std::string bytes = ReadText(m_input);
      Memory m = bytes.rfind("PGMRMEM1", 0) == 0 ? DeserializeSnapshot(bytes)
                                                 : ParseMetadata(bytes, KindOrDie(m_kind));
      Memory embedded = EmbedMemory(m, *e);
      SaveSnapshot(embedded, m_out);
      std::cout << embedded.embedded_count() << " records embedded, dimension "
                << embedded.dimension() << "\n";
    } else if (*split) {
      Dataset ds = LoadDataset(s_dataset, FormatOrDie(s_format));
      ReportQuarantine(ds);
      UnknownUriSplit sp = BuildUnknownUriSplit(ds.samples, s_seed, s_options);
      fs::create_directories(s_out);
      WriteText((fs::path(s_out) / "train.json").string(), DatasetJson(sp.train));
      WriteText((fs::path(s_out) / "valid.json").string(), DatasetJson(sp.valid));
      WriteText((fs::path(s_out) / "test.json").string(), DatasetJson(sp.test));
      json summary = {{"schema_version", kReportSchemaVersion},
                      {"seed", s_seed},
                      {"train", sp.train.size()},
                      {"valid", sp.valid.size()},
                      {"test", sp.test.size()},
                      {"held_out_uris", sp.held_out.size()},
                      {"quarantined", ds.quarantined.size()}};
      WriteJson((fs::path(s_out) / "split_summary.json").string(), summary);
      std::cout << summary.dump(2) << "\n";
    } else if (*run) {
      Setup s(run_o.Load());
      RunReport r = RunPipeline(s.config, s.samples, s.ctx);
      std::vector<json> rows;
      for (const auto &rec : r.records) rows.push_back(rec.ToJson());
      WriteJsonl(s.Out("records.jsonl"), rows);
      WriteJson(s.Out("summary.json"), r.SummaryJson());
      PrintEval(r.eval);
    } else if (*sweep) {
      Setup s(sweep_o.Load());
      SweepReport r = RunRefusalSweep(s.config, s.samples, s.ctx);
      WriteJson(s.Out("refusal_sweep.json"), r.ToJson());
      std::cout << r.ToJson().dump(2) << "\n";
    } else if (*scale) {
      Setup s(scale_o.Load());
      ScalingReport r = RunMemoryScaling(s.config, s.samples, s.ctx, DistractorPool(s));
      WriteJson(s.Out("memory_scaling.json"), r.ToJson());
      std::cout << r.ToJson().dump(2) << "\n";
    } else if (*latency) {
      Setup s(latency_o.Load());
      LatencyReport r = MeasureLatency(s.config, s.samples, s.ctx);
      json doc = r.ToJson();
      if (!skip_probe) {
        HashedTrigramEmbedder probe_embedder(s.config.probe_dimension, s.config.embedder.seed);
        Memory big = EmbedMemory(
            Memory::FromRecords(UriKind::kEntity,
                                GenerateDistractors(UriKind::kEntity,
                                                    s.config.probe_memory_size, 1,
                                                    s.config.seed)),
            probe_embedder);
        std::vector<PlaceholderBinding> probes;
        for (std::size_t i = 0; i < s.config.probes; ++i) {
          probes.push_back({"entity1", UriKind::kEntity,
                            "unlisted probe " + std::to_string(i), "probe description"});
        }
        doc["probe"] = ProbeRetrievalLatency(big, probe_embedder, probes,
                                             s.config.latency_budget_ms)
                           .ToJson();
      }
      WriteJson(s.Out("latency.json"), doc);
      std::cout << doc.dump(2) << "\n";
    } else if (*record) {
      ExperimentConfig c = record_o.Load();
      if (c.paths.fixtures.empty()) throw Error("set paths.fixtures or --fixtures");
      Setup s(c, /*need_provider=*/!oracle);
      if (oracle) {
        OracleOptions o{noise, s.config.seed, oracle_latency};
        WriteFixtures(s.config.paths.fixtures, BuildOracleFixtures(s.samples, s.ctx, o));
        std::cout << s.samples.size() << " oracle fixtures written\n";
      } else {
        std::vector<std::string> prompts;
        for (const auto &sample : s.samples) prompts.push_back(PromptFor(sample.question, s.ctx));
        RecordSummary r = RecordSession(prompts, *s.provider, s.ctx.params,
                                        s.config.paths.fixtures);
        std::cout << r.entries << " entries (" << r.generated << " generated, "
                  << r.reused << " reused, " << r.errors << " errors)\n";
      }
    } else if (*synth) {
      SyntheticKg kg = GenerateKg(y_kg);
      auto corpus = GenerateCorpus(kg, y_samples, y_kg.seed + 1);
      std::vector<DatasetSample> samples;
      for (auto &c : corpus) samples.push_back({c.id, c.question, c.gold_sparql});
      fs::create_directories(y_out);
      fs::path dir(y_out);
      WriteText((dir / "entities.jsonl").string(), MetadataJsonl(kg.entities));
      WriteText((dir / "relations.jsonl").string(), MetadataJsonl(kg.relations));
      WriteText((dir / "dataset.json").string(), DatasetJson(samples));
      ExperimentConfig c;
      c.seed = y_kg.seed;
      c.paths.entities = (dir / "entities.jsonl").string();
      c.paths.relations = (dir / "relations.jsonl").string();
      c.paths.dataset = (dir / "dataset.json").string();
      c.paths.fixtures = (dir / "fixtures.jsonl").string();
      c.paths.output_dir = (dir / "out").string();
      WriteJson((dir / "config.json").string(), c.ToJson());
      std::cout << kg.entities.size() << " entities, " << kg.relations.size()
                << " relations, " << samples.size() << " samples in " << y_out << "\n";
    }
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
