#include "pgmr/kg_store.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pgmr/embedding.h"
#include "pgmr/error.h"
#include "pgmr/text.h"

namespace pgmr {

using json = nlohmann::json;

KgRecord KgRecord::Make(UriRef uri, std::string label,
                        std::string description) {
  KgRecord r;
  r.uri = uri;
  r.normalized_label = NormalizeLabel(label);
  r.label = std::move(label);
  r.description = std::move(description);
  return r;
}

std::string EmbeddingText(std::string_view label,
                          std::string_view description) {
  std::string out(Trim(label));
  std::string_view desc = Trim(description);
  if (!desc.empty()) {
    out += ". ";
    out += desc;
  }
  return out;
}

void FlatIndex::Add(const Embedding &v) {
  data_.insert(data_.end(), v.begin(), v.end());
}

float FlatIndex::Score(std::size_t row, const Embedding &query) const {
  return Dot(std::span<const float>(data_.data() + row * dimension_,
                                    static_cast<std::size_t>(dimension_)),
             query);
}

std::vector<float> FlatIndex::Scores(const Embedding &query) const {
  std::vector<float> out(size());
  const float *row = data_.data();
  const std::size_t dim = static_cast<std::size_t>(dimension_);
  const float *q = query.data();
  constexpr std::size_t kLanes = 8;
  const std::size_t body = dim - dim % kLanes;
  for (std::size_t r = 0; r < out.size(); ++r, row += dim) {
    float lane[kLanes] = {};
    for (std::size_t k = 0; k < body; k += kLanes) {
      for (std::size_t l = 0; l < kLanes; ++l) lane[l] += row[k + l] * q[k + l];
    }
    float acc = 0.0f;
    for (std::size_t k = body; k < dim; ++k) acc += row[k] * q[k];
    for (std::size_t l = 0; l < kLanes; ++l) acc += lane[l];
    out[r] = acc;
  }
  return out;
}

Memory::Memory(UriKind kind, int dimension)
    : kind_(kind), dimension_(dimension), index_(dimension) {}

Memory Memory::FromRecords(UriKind kind, std::vector<KgRecord> records,
                           int dimension) {
  Memory m(kind, dimension);
  m.records_.reserve(records.size());
  for (auto &r : records) m.Insert(std::move(r));
  return m;
}

void Memory::Insert(KgRecord record) {
  if (record.uri.kind() != kind_) {
    throw Error(record.uri.canonical_text() + " is not a " +
                UriKindName(kind_));
  }
  if (by_uri_.count(record.uri)) {
    throw Error("duplicate URI " + record.uri.canonical_text());
  }
  if (record.normalized_label.empty()) {
    record.normalized_label = NormalizeLabel(record.label);
  }
  if (record.embedding) {
    int dim = static_cast<int>(record.embedding->size());
    if (dimension_ == 0) {
      dimension_ = dim;
      index_ = FlatIndex(dim);
    }
    if (dim != dimension_) {
      throw Error("embedding of " + record.uri.canonical_text() + " has " +
                  std::to_string(dim) + " dimensions, memory has " +
                  std::to_string(dimension_));
    }
  }
  std::size_t pos = records_.size();
  by_uri_.emplace(record.uri, pos);
  label_index_[record.normalized_label].push_back(pos);
  if (record.embedding) {
    index_.Add(*record.embedding);
    index_rows_.push_back(pos);
  }
  records_.push_back(std::move(record));
}

const KgRecord *Memory::Find(const UriRef &uri) const {
  auto it = by_uri_.find(uri);
  return it == by_uri_.end() ? nullptr : &records_[it->second];
}

std::vector<const KgRecord *> Memory::LookupLabel(
    std::string_view label) const {
  std::vector<const KgRecord *> out;
  auto it = label_index_.find(NormalizeLabel(label));
  if (it == label_index_.end()) return out;
  for (std::size_t pos : it->second) out.push_back(&records_[pos]);
  return out;
}

bool Memory::embedded() const { return index_rows_.size() == records_.size(); }

bool Contains(const Memory &memory, const UriRef &uri) {
  return memory.Contains(uri);
}

Memory ParseMetadata(std::string_view contents, UriKind kind) {
  std::vector<KgRecord> records;
  std::unordered_map<UriRef, std::size_t> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    std::size_t nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) nl = contents.size();
    std::string_view line = Trim(contents.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception &e) {
      throw FormatError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!j.is_object() || !j.contains("uri") || !j["uri"].is_string() ||
        !j.contains("label") || !j["label"].is_string()) {
      throw FormatError("record needs string fields uri and label", line_no);
    }
    auto uri = UriRef::Parse(j["uri"].get<std::string>());
    if (!uri) {
      throw FormatError("unrecognized URI " + j["uri"].get<std::string>(),
                        line_no);
    }
    if (uri->kind() != kind) {
      throw FormatError(uri->canonical_text() + " is not a " +
                            UriKindName(kind),
                        line_no);
    }
    if (!seen.emplace(*uri, line_no).second) {
      throw FormatError("duplicate URI " + uri->canonical_text(), line_no);
    }
    std::string label = j["label"].get<std::string>();
    if (Trim(label).empty()) throw FormatError("empty label", line_no);
    std::string description;
    if (j.contains("description") && j["description"].is_string()) {
      description = j["description"].get<std::string>();
    }
    records.push_back(
        KgRecord::Make(*uri, std::move(label), std::move(description)));
  }
  return Memory::FromRecords(kind, std::move(records));
}

Memory LoadMetadata(const std::string &path, UriKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseMetadata(buf.str(), kind);
}

Memory EmbedMemory(const Memory &memory, const EmbeddingProvider &embedder,
                   bool only_missing) {
  constexpr std::size_t kBatch = 256;
  std::vector<KgRecord> records = memory.records();
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!only_missing || !records[i].embedding) todo.push_back(i);
  }
  for (std::size_t start = 0; start < todo.size(); start += kBatch) {
    std::size_t end = std::min(todo.size(), start + kBatch);
    std::vector<std::string> texts;
    for (std::size_t k = start; k < end; ++k) {
      const auto &r = records[todo[k]];
      texts.push_back(EmbeddingText(r.label, r.description));
    }
    std::vector<Embedding> vecs;
    try {
      vecs = embedder.EmbedBatch(texts);
    } catch (const std::exception &) {
      // Retry one by one to name the failing record.
      for (std::size_t k = start; k < end; ++k) {
        try {
          vecs.push_back(embedder.Embed(texts[k - start]));
        } catch (const std::exception &e) {
          throw Error("embedding failed for " +
                      records[todo[k]].uri.canonical_text() + ": " + e.what());
        }
      }
    }
    if (vecs.size() != end - start) {
      throw Error("embedder returned " + std::to_string(vecs.size()) +
                  " vectors for " + std::to_string(end - start) + " inputs");
    }
    for (std::size_t k = start; k < end; ++k) {
      if (static_cast<int>(vecs[k - start].size()) != embedder.dimension()) {
        throw Error("embedding of " + records[todo[k]].uri.canonical_text() +
                    " has wrong dimension");
      }
      records[todo[k]].embedding = std::move(vecs[k - start]);
    }
  }
  return Memory::FromRecords(memory.kind(), std::move(records),
                             embedder.dimension());
}

namespace {

// Uniform integer in [0, n) by rejection; stable across standard libraries.
std::uint64_t Bounded(std::mt19937_64 &rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace

Ablation Ablate(const Memory &memory, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw Error("ablation fraction must be in [0, 1]");
  }
  if (memory.empty()) throw Error("cannot ablate an empty memory");
  const std::size_t n = memory.size();
  const auto remove = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(n) + 1e-9));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < remove; ++i) {
    std::size_t j = i + Bounded(rng, n - i);
    std::swap(order[i], order[j]);
  }
  std::vector<bool> dropped(n, false);
  Ablation out;
  for (std::size_t i = 0; i < remove; ++i) {
    dropped[order[i]] = true;
    out.removed.push_back(memory.records()[order[i]].uri);
  }
  std::sort(out.removed.begin(), out.removed.end());
  std::vector<KgRecord> kept;
  kept.reserve(n - remove);
  for (std::size_t i = 0; i < n; ++i) {
    if (!dropped[i]) kept.push_back(memory.records()[i]);
  }
  out.memory = Memory::FromRecords(memory.kind(), std::move(kept),
                                   memory.dimension());
  return out;
}

Memory AugmentWithDistractors(const Memory &memory,
                              const std::vector<KgRecord> &distractors,
                              int factor) {
  if (factor < 1) throw Error("augmentation factor must be >= 1");
  if (factor == 1) return memory;
  const std::size_t needed = memory.size() * static_cast<std::size_t>(factor - 1);
  if (distractors.size() < needed) {
    throw Error("need " + std::to_string(needed) + " distractors, have " +
                std::to_string(distractors.size()));
  }
  std::vector<KgRecord> records = memory.records();
  records.reserve(memory.size() * static_cast<std::size_t>(factor));
  std::unordered_map<UriRef, bool> seen;
  for (const auto &r : records) seen.emplace(r.uri, true);
  for (std::size_t i = 0; i < needed; ++i) {
    const KgRecord &d = distractors[i];
    if (!seen.emplace(d.uri, true).second) {
      throw Error("distractor collides with existing URI " +
                  d.uri.canonical_text());
    }
    records.push_back(d);
  }
  return Memory::FromRecords(memory.kind(), std::move(records),
                             memory.dimension());
}

// ---------------------------------------------------------------------------
// Snapshots.

namespace {

constexpr char kMagic[8] = {'P', 'G', 'M', 'R', 'M', 'E', 'M', '1'};

template <typename T>
void Put(std::string &out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void PutString(std::string &out, const std::string &s) {
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T Get() {
    Need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string GetString() {
    auto len = Get<std::uint32_t>();
    Need(len);
    std::string s(bytes_.substr(pos_, len));
    pos_ += len;
    return s;
  }

  void Need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("truncated snapshot");
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string SerializeSnapshot(const Memory &memory) {
  std::string out(kMagic, sizeof(kMagic));
  Put<std::uint8_t>(out, memory.kind() == UriKind::kEntity ? 0 : 1);
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(memory.dimension()));
  Put<std::uint64_t>(out, memory.size());
  for (const auto &r : memory.records()) {
    Put<std::uint64_t>(out, r.uri.id());
    PutString(out, r.label);
    PutString(out, r.description);
    Put<std::uint8_t>(out, r.embedding ? 1 : 0);
    if (r.embedding) {
      out.append(reinterpret_cast<const char *>(r.embedding->data()),
                 r.embedding->size() * sizeof(float));
    }
  }
  return out;
}

Memory DeserializeSnapshot(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a memory snapshot");
  }
  Reader in(bytes.substr(sizeof(kMagic)));
  UriKind kind = in.Get<std::uint8_t>() == 0 ? UriKind::kEntity
                                             : UriKind::kRelation;
  int dimension = static_cast<int>(in.Get<std::uint32_t>());
  auto count = in.Get<std::uint64_t>();
  std::vector<KgRecord> records;
  for (std::uint64_t i = 0; i < count; ++i) {
    UriRef uri(kind, in.Get<std::uint64_t>());
    std::string label = in.GetString();
    std::string description = in.GetString();
    KgRecord r = KgRecord::Make(uri, std::move(label), std::move(description));
    if (in.Get<std::uint8_t>()) {
      Embedding v(static_cast<std::size_t>(dimension));
      for (auto &x : v) x = in.Get<float>();
      r.embedding = std::move(v);
    }
    records.push_back(std::move(r));
  }
  if (!in.done()) throw FormatError("trailing bytes in snapshot");
  return Memory::FromRecords(kind, std::move(records), dimension);
}

void SaveSnapshot(const Memory &memory, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  std::string bytes = SerializeSnapshot(memory);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Memory LoadSnapshot(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return DeserializeSnapshot(buf.str());
}

}  // namespace pgmr
