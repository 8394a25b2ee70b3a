#ifndef PGMR_TESTS_FIXTURES_H_
#define PGMR_TESTS_FIXTURES_H_

#include <stdexcept>
#include <string>
#include <vector>

#include "pgmr/embedding.h"
#include "pgmr/kg_store.h"

namespace pgmr::testing {

inline const char kEinsteinDesc[] =
    "German-born theoretical physicist, developer of the theory of "
    "relativity, Nobel Prize laureate (1921)";
inline const char kHeadOfStateDesc[] =
    "official with the highest formal authority in a country/state";

// Fixture query with two patterns over four URIs.
inline const char kFilmQuery[] =
    "select distinct ?sbj where { ?sbj wdt:p1040 wd:q8003 . ?sbj wdt:p31 "
    "wd:q11424 }";

inline Memory EntityMemory(const HashedTrigramEmbedder *embedder = nullptr) {
  Memory m = Memory::FromRecords(
      UriKind::kEntity,
      {KgRecord::Make(UriRef::Entity(937), "Albert Einstein", kEinsteinDesc),
       KgRecord::Make(UriRef::Entity(76), "Barack Obama",
                      "44th president of the United States"),
       KgRecord::Make(UriRef::Entity(8003), "Stanley Kubrick",
                      "American filmmaker (1928-1999)"),
       KgRecord::Make(UriRef::Entity(11424), "film",
                      "sequence of images that give the impression of movement"),
       KgRecord::Make(UriRef::Entity(30), "United States of America",
                      "country primarily located in North America")});
  return embedder ? EmbedMemory(m, *embedder) : m;
}

inline Memory RelationMemory(const HashedTrigramEmbedder *embedder = nullptr) {
  Memory m = Memory::FromRecords(
      UriKind::kRelation,
      {KgRecord::Make(UriRef::Relation(35), "head of state", kHeadOfStateDesc),
       KgRecord::Make(UriRef::Relation(1040), "film editor",
                      "person who edited the film"),
       KgRecord::Make(UriRef::Relation(31), "instance of",
                      "that class of which this subject is a particular example"),
       KgRecord::Make(UriRef::Relation(26), "spouse",
                      "the subject has the object as their spouse")});
  return embedder ? EmbedMemory(m, *embedder) : m;
}

// Embedder that must never be called.
class FailingEmbedder : public EmbeddingProvider {
 public:
  explicit FailingEmbedder(int dimension) : dimension_(dimension) {}
  int dimension() const override { return dimension_; }
  Embedding Embed(std::string_view text) const override {
    throw std::logic_error("embedder called for " + std::string(text));
  }

 private:
  int dimension_;
};

}  // namespace pgmr::testing

#endif  // PGMR_TESTS_FIXTURES_H_
