#ifndef PGMR_GENERATION_H_
#define PGMR_GENERATION_H_

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pgmr/transform.h"
#include "pgmr/uri.h"

namespace pgmr {

struct GenerationParams {
  double temperature = 0.0;
  int max_tokens = 512;
};

// Maps a prompt to model output. Implementations must tolerate concurrent
// calls.
class GenerationProvider {
 public:
  virtual ~GenerationProvider() = default;
  virtual std::string Generate(const std::string &prompt,
                               const GenerationParams &params) const = 0;
};

// One recorded prompt/output pair.
struct FixtureEntry {
  std::string prompt_hash;  // Sha256Hex(prompt)
  std::string prompt;
  std::string output;
  std::optional<double> latency_ms;
  std::optional<std::string> error;  // transport failure while recording

  bool operator==(const FixtureEntry &) const = default;
};

std::vector<FixtureEntry> ReadFixtures(const std::string &path);
std::vector<FixtureEntry> ParseFixtures(std::string_view contents);
// One JSON object per line, sorted by prompt hash.
std::string SerializeFixtures(std::vector<FixtureEntry> entries);
void WriteFixtures(const std::string &path, std::vector<FixtureEntry> entries);

// Serves recorded outputs keyed by prompt hash. Unknown prompts throw
// MissingFixture; entries recorded with an error throw TransportError.
// With latency emulation each call sleeps for the recorded latency.
class ReplayProvider : public GenerationProvider {
 public:
  explicit ReplayProvider(std::vector<FixtureEntry> entries,
                          bool emulate_latency = false);
  static ReplayProvider FromFile(const std::string &path,
                                 bool emulate_latency = false);

  std::string Generate(const std::string &prompt,
                       const GenerationParams &params) const override;

  std::size_t size() const { return entries_.size(); }
  const FixtureEntry *Find(std::string_view prompt_hash) const;

 private:
  std::map<std::string, FixtureEntry, std::less<>> entries_;
  bool emulate_latency_;
};

struct ChatCompletionsConfig {
  std::string base_url;  // e.g. https://api.openai.com
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};

  // PGMR_LLM_BASE_URL, PGMR_LLM_API_KEY and PGMR_LLM_MODEL override the
  // corresponding fields when set.
  void ApplyEnvironment();
};

// Chat-style completion endpoint; the prompt is sent as a single user
// message and the first choice's content is returned.
class ChatCompletionsProvider : public GenerationProvider {
 public:
  explicit ChatCompletionsProvider(ChatCompletionsConfig config);
  std::string Generate(const std::string &prompt,
                       const GenerationParams &params) const override;

 private:
  ChatCompletionsConfig config_;
};

// Wraps a callable; used for oracle runs and tests.
class FunctionProvider : public GenerationProvider {
 public:
  using Fn = std::function<std::string(const std::string &prompt)>;
  explicit FunctionProvider(Fn fn) : fn_(std::move(fn)) {}
  std::string Generate(const std::string &prompt,
                       const GenerationParams &) const override {
    return fn_(prompt);
  }

 private:
  Fn fn_;
};

enum class PromptMode { kDirect, kRag, kPgmr };

const char *PromptModeName(PromptMode mode);
std::optional<PromptMode> ParsePromptMode(std::string_view name);

struct Shot {
  std::string question;
  std::string target;  // SPARQL, or a rendered intermediate query for Pgmr
};

struct PromptSpec {
  PromptMode mode = PromptMode::kPgmr;
  std::vector<Shot> shots;
  std::size_t k = 10;        // Rag only
  std::string instructions;  // empty: DefaultInstructions(mode)
};

std::string DefaultInstructions(PromptMode mode);

struct RetrievedUri {
  UriRef uri;
  std::string label;
  std::string description;
};

// Instructions, exemplars, the candidate URI block (Rag), then the question.
// Rag mode requires exactly spec.k retrieved URIs.
std::string BuildPrompt(const PromptSpec &spec, std::string_view question,
                        const std::vector<RetrievedUri> *retrieved = nullptr);

// Strips surrounding code fences and whitespace from raw model output.
std::string CleanOutput(std::string_view output);

struct GeneratedIntermediate {
  std::string prompt;
  std::string output;
  std::optional<IntermediateQuery> query;  // unset when malformed
  std::string malformed_reason;
};

GeneratedIntermediate GenerateIntermediate(std::string_view question,
                                           const GenerationProvider &provider,
                                           const PromptSpec &spec,
                                           const GenerationParams &params = {});

struct RecordSummary {
  std::size_t entries = 0;
  std::size_t generated = 0;  // provider calls made in this session
  std::size_t reused = 0;     // taken from the existing fixture file
  std::size_t errors = 0;
};

// Generates an output for every prompt and writes the fixture file. Entries
// already present in `path` without an error are kept rather than
// regenerated, so re-recording identical prompts leaves the file unchanged.
// Transport errors are stored per entry and the session continues.
RecordSummary RecordSession(const std::vector<std::string> &prompts,
                            const GenerationProvider &provider,
                            const GenerationParams &params,
                            const std::string &path);

// Builds the prompt of each question from `spec` (Direct or Pgmr) and
// records it.
RecordSummary RecordSession(const std::vector<std::string> &questions,
                            const GenerationProvider &provider,
                            const PromptSpec &spec,
                            const GenerationParams &params,
                            const std::string &path);

}  // namespace pgmr

#endif  // PGMR_GENERATION_H_
