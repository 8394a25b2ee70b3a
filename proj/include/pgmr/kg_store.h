#ifndef PGMR_KG_STORE_H_
#define PGMR_KG_STORE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pgmr/uri.h"

namespace pgmr {

class EmbeddingProvider;

using Embedding = std::vector<float>;

struct KgRecord {
  UriRef uri;
  std::string label;
  std::string normalized_label;
  std::string description;
  std::optional<Embedding> embedding;

  static KgRecord Make(UriRef uri, std::string label, std::string description);

  bool operator==(const KgRecord &) const = default;
};

// Text that is embedded as the memory key of a record: "Label. Description",
// or the label alone when the description is empty.
std::string EmbeddingText(std::string_view label, std::string_view description);

// Exact inner-product search over a dense row-major matrix of unit vectors.
class FlatIndex {
 public:
  FlatIndex() = default;
  explicit FlatIndex(int dimension) : dimension_(dimension) {}

  void Add(const Embedding &v);
  std::size_t size() const { return dimension_ ? data_.size() / dimension_ : 0; }
  int dimension() const { return dimension_; }

  // Single-precision inner product of every row with `query`, within
  // kScreenError of Score() for dimensions up to 1536. For screening.
  std::vector<float> Scores(const Embedding &query) const;
  // Inner product accumulated in double, as Dot().
  float Score(std::size_t row, const Embedding &query) const;

  static constexpr float kScreenError = 1e-4f;

 private:
  int dimension_ = 0;
  std::vector<float> data_;
};

// One non-parametric memory (entities or relations). Immutable once built:
// the transforming operations below return new memories.
class Memory {
 public:
  Memory() = default;
  explicit Memory(UriKind kind, int dimension = 0);

  // Validates kinds, duplicates and embedding dimensions. Throws Error.
  static Memory FromRecords(UriKind kind, std::vector<KgRecord> records,
                            int dimension = 0);

  UriKind kind() const { return kind_; }
  int dimension() const { return dimension_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<KgRecord> &records() const { return records_; }

  const KgRecord *Find(const UriRef &uri) const;
  bool Contains(const UriRef &uri) const { return Find(uri) != nullptr; }

  // Records whose normalized label equals NormalizeLabel(label).
  std::vector<const KgRecord *> LookupLabel(std::string_view label) const;

  // True when every record carries an embedding.
  bool embedded() const;
  std::size_t embedded_count() const { return index_rows_.size(); }

  const FlatIndex &vector_index() const { return index_; }
  // Record backing row `row` of the vector index.
  const KgRecord &IndexRecord(std::size_t row) const {
    return records_[index_rows_[row]];
  }

 private:
  void Insert(KgRecord record);

  UriKind kind_ = UriKind::kEntity;
  int dimension_ = 0;
  std::vector<KgRecord> records_;
  std::unordered_map<UriRef, std::size_t> by_uri_;
  std::unordered_map<std::string, std::vector<std::size_t>> label_index_;
  FlatIndex index_;
  std::vector<std::size_t> index_rows_;
};

// Reads line-delimited JSON records {uri, label, description}. Throws
// FormatError naming the line on malformed input, duplicates or kind
// mismatches.
Memory LoadMetadata(const std::string &path, UriKind kind);
Memory ParseMetadata(std::string_view contents, UriKind kind);

// Embeds EmbeddingText(label, description) of every record. With
// `only_missing`, records that already have an embedding are kept as is.
Memory EmbedMemory(const Memory &memory, const EmbeddingProvider &embedder,
                   bool only_missing = false);

struct Ablation {
  Memory memory;
  std::vector<UriRef> removed;  // sorted
};

// Removes floor(fraction * N) uniformly sampled records, deterministically
// for a given seed.
Ablation Ablate(const Memory &memory, double fraction, std::uint64_t seed);

// Grows the memory to factor * N records using the leading distractors.
Memory AugmentWithDistractors(const Memory &memory,
                              const std::vector<KgRecord> &distractors,
                              int factor);

bool Contains(const Memory &memory, const UriRef &uri);

// Binary snapshot: dimension, records and embeddings; bit-exact round trip.
void SaveSnapshot(const Memory &memory, const std::string &path);
Memory LoadSnapshot(const std::string &path);
std::string SerializeSnapshot(const Memory &memory);
Memory DeserializeSnapshot(std::string_view bytes);

}  // namespace pgmr

#endif  // PGMR_KG_STORE_H_
