#ifndef PGMR_SYNTHETIC_H_
#define PGMR_SYNTHETIC_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pgmr/kg_store.h"

namespace pgmr {

// Word-list generated KG metadata and questions for offline experiments.

struct SyntheticKgOptions {
  std::size_t entities = 500;
  std::size_t relations = 40;
  std::uint64_t seed = 1;
  // Share of entities whose label copies an earlier entity's label (the
  // description stays distinct).
  double duplicate_label_fraction = 0.0;
  std::uint64_t first_entity_id = 1000;
  std::uint64_t first_relation_id = 10;
};

struct SyntheticKg {
  std::vector<KgRecord> entities;
  std::vector<KgRecord> relations;
};

SyntheticKg GenerateKg(const SyntheticKgOptions &options);

struct SyntheticSample {
  std::string id;
  std::string question;
  std::string gold_sparql;
};

// Questions over the KG in several query shapes: single and double triple
// patterns, ASK, COUNT, statement qualifiers (p:/ps:/pq:), FILTER and
// ORDER BY/LIMIT modifiers. Keyword and URI case varies between samples.
std::vector<SyntheticSample> GenerateCorpus(const SyntheticKg &kg,
                                            std::size_t count,
                                            std::uint64_t seed);

// Random records with ids starting at `first_id`.
std::vector<KgRecord> GenerateDistractors(UriKind kind, std::size_t count,
                                          std::uint64_t first_id,
                                          std::uint64_t seed);

// One-character typo (deletion or adjacent swap) in a word of at least
// four characters; labels without such a word are returned unchanged.
std::string PerturbLabel(const std::string &label, std::mt19937_64 &rng);

// Metadata file lines: {"uri","label","description"}.
std::string MetadataJsonl(const std::vector<KgRecord> &records);

}  // namespace pgmr

#endif  // PGMR_SYNTHETIC_H_
