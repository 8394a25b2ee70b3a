#include "pgmr/generation.h"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "http.h"
#include "pgmr/error.h"
#include "pgmr/text.h"

namespace pgmr {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Fixtures.

std::vector<FixtureEntry> ParseFixtures(std::string_view contents) {
  std::vector<FixtureEntry> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    std::size_t nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) nl = contents.size();
    std::string_view line = Trim(contents.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    FixtureEntry e;
    try {
      json j = json::parse(line);
      e.prompt = j.value("prompt", "");
      e.output = j.value("output", "");
      e.prompt_hash = j.contains("prompt_hash")
                          ? j.at("prompt_hash").get<std::string>()
                          : Sha256Hex(e.prompt);
      if (j.contains("latency_ms") && !j["latency_ms"].is_null()) {
        e.latency_ms = j["latency_ms"].get<double>();
      }
      if (j.contains("error") && !j["error"].is_null()) {
        e.error = j["error"].get<std::string>();
      }
    } catch (const json::exception &ex) {
      throw FormatError(std::string("bad fixture record: ") + ex.what(), line_no);
    }
    if (!e.prompt.empty() && Sha256Hex(e.prompt) != e.prompt_hash) {
      throw FormatError("prompt_hash does not match prompt", line_no);
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<FixtureEntry> ReadFixtures(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseFixtures(buf.str());
}

std::string SerializeFixtures(std::vector<FixtureEntry> entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const FixtureEntry &a, const FixtureEntry &b) {
                     return a.prompt_hash < b.prompt_hash;
                   });
  std::string out;
  for (const auto &e : entries) {
    json j;
    j["prompt_hash"] = e.prompt_hash;
    j["prompt"] = e.prompt;
    j["output"] = e.output;
    if (e.latency_ms) j["latency_ms"] = *e.latency_ms;
    if (e.error) j["error"] = *e.error;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void WriteFixtures(const std::string &path, std::vector<FixtureEntry> entries) {
  std::string data = SerializeFixtures(std::move(entries));
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << data;
    if (!out) throw Error("cannot write " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw Error("cannot rename " + tmp + " to " + path);
  }
}

// ---------------------------------------------------------------------------
// Providers.

ReplayProvider::ReplayProvider(std::vector<FixtureEntry> entries,
                               bool emulate_latency)
    : emulate_latency_(emulate_latency) {
  for (auto &e : entries) {
    std::string key = e.prompt_hash;
    entries_.emplace(std::move(key), std::move(e));  // first wins
  }
}

ReplayProvider ReplayProvider::FromFile(const std::string &path,
                                        bool emulate_latency) {
  return ReplayProvider(ReadFixtures(path), emulate_latency);
}

const FixtureEntry *ReplayProvider::Find(std::string_view prompt_hash) const {
  auto it = entries_.find(prompt_hash);
  return it == entries_.end() ? nullptr : &it->second;
}

std::string ReplayProvider::Generate(const std::string &prompt,
                                     const GenerationParams &) const {
  std::string hash = Sha256Hex(prompt);
  const FixtureEntry *e = Find(hash);
  if (e == nullptr) throw MissingFixture(hash);
  if (emulate_latency_ && e->latency_ms && *e->latency_ms > 0) {
    std::this_thread::sleep_for(
        std::chrono::duration<double, std::milli>(*e->latency_ms));
  }
  if (e->error) throw TransportError("recorded failure: " + *e->error);
  return e->output;
}

void ChatCompletionsConfig::ApplyEnvironment() {
  if (const char *v = std::getenv("PGMR_LLM_BASE_URL"); v && *v) base_url = v;
  if (const char *v = std::getenv("PGMR_LLM_API_KEY"); v && *v) api_key = v;
  if (const char *v = std::getenv("PGMR_LLM_MODEL"); v && *v) model = v;
}

ChatCompletionsProvider::ChatCompletionsProvider(ChatCompletionsConfig config)
    : config_(std::move(config)) {
  if (config_.base_url.empty()) throw Error("LLM base_url is empty");
  if (config_.model.empty()) throw Error("LLM model is empty");
}

std::string ChatCompletionsProvider::Generate(
    const std::string &prompt, const GenerationParams &params) const {
  json body = {
      {"model", config_.model},
      {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", params.temperature},
      {"max_tokens", params.max_tokens},
  };
  http::Request req;
  req.base_url = config_.base_url;
  req.path = config_.path;
  req.timeout = config_.timeout;
  if (!config_.api_key.empty()) {
    req.headers.emplace_back("Authorization", "Bearer " + config_.api_key);
  }
  http::Response res =
      http::Post(req, body.dump(), "application/json",
                 {config_.max_retries, config_.initial_backoff});
  if (res.status != 200) {
    throw TransportError("LLM endpoint returned HTTP " +
                         std::to_string(res.status) + ": " +
                         res.body.substr(0, 200));
  }
  try {
    json j = json::parse(res.body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception &e) {
    throw TransportError(std::string("malformed LLM response: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Prompts.

const char *PromptModeName(PromptMode mode) {
  switch (mode) {
    case PromptMode::kDirect: return "direct";
    case PromptMode::kRag: return "rag";
    case PromptMode::kPgmr: return "pgmr";
  }
  return "?";
}

std::optional<PromptMode> ParsePromptMode(std::string_view name) {
  std::string n = AsciiLower(name);
  if (n == "direct") return PromptMode::kDirect;
  if (n == "rag") return PromptMode::kRag;
  if (n == "pgmr") return PromptMode::kPgmr;
  return std::nullopt;
}

std::string DefaultInstructions(PromptMode mode) {
  switch (mode) {
    case PromptMode::kDirect:
      return "Translate the question into a SPARQL query over Wikidata. "
             "Answer with the query only.";
    case PromptMode::kRag:
      return "Translate the question into a SPARQL query over Wikidata. "
             "Candidate URIs with their labels and descriptions are listed "
             "before the question. Answer with the query only.";
    case PromptMode::kPgmr:
      return "Translate the question into a SPARQL query whose entities and "
             "relations are written as placeholders (entity1, relation1, ...). "
             "After the query, leave a blank line and define every "
             "placeholder on its own line as\n"
             "entityN = [ENT] label [/ENT] description\n"
             "relationN = [REL] label [/REL] description";
  }
  return {};
}

std::string BuildPrompt(const PromptSpec &spec, std::string_view question,
                        const std::vector<RetrievedUri> *retrieved) {
  if (spec.mode == PromptMode::kRag) {
    if (spec.k < 1) throw Error("rag prompts need k >= 1");
    if (retrieved == nullptr) throw Error("rag prompt built without retrieved URIs");
    if (retrieved->size() != spec.k) {
      throw Error("rag prompt expects " + std::to_string(spec.k) +
                  " retrieved URIs, got " + std::to_string(retrieved->size()));
    }
  }
  std::string out =
      spec.instructions.empty() ? DefaultInstructions(spec.mode) : spec.instructions;
  out += "\n\n";
  for (const auto &shot : spec.shots) {
    out += "Question: " + shot.question + "\nQuery:\n" + shot.target + "\n\n";
  }
  if (spec.mode == PromptMode::kRag) {
    out += "Candidate URIs:\n";
    for (const auto &r : *retrieved) {
      out += r.uri.canonical_text() + " | " + r.label;
      if (!r.description.empty()) out += " | " + r.description;
      out += "\n";
    }
    out += "\n";
  }
  out += "Question: ";
  out += question;
  out += "\nQuery:\n";
  return out;
}

std::string CleanOutput(std::string_view output) {
  std::string out;
  std::size_t pos = 0;
  while (pos < output.size()) {
    std::size_t nl = output.find('\n', pos);
    std::size_t end = nl == std::string_view::npos ? output.size() : nl + 1;
    std::string_view line = output.substr(pos, end - pos);
    if (Trim(line).substr(0, 3) != "```") out += line;
    pos = end;
  }
  return std::string(Trim(out));
}

GeneratedIntermediate GenerateIntermediate(std::string_view question,
                                           const GenerationProvider &provider,
                                           const PromptSpec &spec,
                                           const GenerationParams &params) {
  if (spec.mode != PromptMode::kPgmr) {
    throw Error("intermediate generation needs a pgmr prompt spec");
  }
  GeneratedIntermediate g;
  g.prompt = BuildPrompt(spec, question);
  g.output = provider.Generate(g.prompt, params);
  try {
    g.query = ParsePgmr(g.output);
  } catch (const MalformedOutput &e) {
    g.malformed_reason = e.what();
  }
  return g;
}

// ---------------------------------------------------------------------------
// Recording.

RecordSummary RecordSession(const std::vector<std::string> &prompts,
                            const GenerationProvider &provider,
                            const GenerationParams &params,
                            const std::string &path) {
  std::map<std::string, FixtureEntry> entries;
  if (std::ifstream probe(path); probe.good()) {
    for (auto &e : ReadFixtures(path)) {
      std::string key = e.prompt_hash;
      entries.emplace(std::move(key), std::move(e));
    }
  }
  RecordSummary summary;
  for (const auto &prompt : prompts) {
    std::string hash = Sha256Hex(prompt);
    auto it = entries.find(hash);
    if (it != entries.end() && !it->second.error) {
      ++summary.reused;
      continue;
    }
    FixtureEntry e;
    e.prompt_hash = hash;
    e.prompt = prompt;
    auto start = std::chrono::steady_clock::now();
    try {
      e.output = provider.Generate(prompt, params);
    } catch (const Error &ex) {
      e.error = ex.what();
      ++summary.errors;
    }
    e.latency_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start)
                       .count();
    ++summary.generated;
    entries.insert_or_assign(hash, std::move(e));
  }
  std::vector<FixtureEntry> all;
  for (auto &[hash, e] : entries) all.push_back(std::move(e));
  summary.entries = all.size();
  WriteFixtures(path, std::move(all));
  return summary;
}

RecordSummary RecordSession(const std::vector<std::string> &questions,
                            const GenerationProvider &provider,
                            const PromptSpec &spec,
                            const GenerationParams &params,
                            const std::string &path) {
  std::vector<std::string> prompts;
  prompts.reserve(questions.size());
  for (const auto &q : questions) prompts.push_back(BuildPrompt(spec, q));
  return RecordSession(prompts, provider, params, path);
}

}  // namespace pgmr
