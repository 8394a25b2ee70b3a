#include <gtest/gtest.h>

#include <random>

#include "fixtures.h"
#include "pgmr/error.h"
#include "pgmr/metrics.h"
#include "pgmr/synthetic.h"
#include "pgmr/text.h"
#include "pgmr/transform.h"

namespace pgmr {
namespace {

using testing::EntityMemory;
using testing::kEinsteinDesc;
using testing::kFilmQuery;
using testing::kHeadOfStateDesc;
using testing::RelationMemory;

TEST(SparqlToPgmr, EinsteinBinding) {
  auto conv = SparqlToPgmr("select ?x where { wd:Q937 wdt:P27 ?x }", EntityMemory(),
                           Memory::FromRecords(UriKind::kRelation,
                                               {KgRecord::Make(UriRef::Relation(27),
                                                               "country of citizenship",
                                                               "")}));
  ASSERT_EQ(conv.query.bindings.size(), 2u);
  EXPECT_EQ(conv.query.bindings[0].Serialize(),
            std::string("entity1 = [ENT] Albert Einstein [/ENT] ") + kEinsteinDesc);
  EXPECT_EQ(conv.query.bindings[1].Serialize(),
            "relation1 = [REL] country of citizenship [/REL]");
  EXPECT_EQ(conv.query.template_text, "select ?x where { entity1 relation1 ?x }");
}

TEST(SparqlToPgmr, HeadOfStateBinding) {
  auto conv = SparqlToPgmr("select ?x where { wd:q30 wdt:p35 ?x }", EntityMemory(),
                           RelationMemory());
  EXPECT_EQ(conv.query.Binding("relation1")->Serialize(),
            std::string("relation1 = [REL] head of state [/REL] ") + kHeadOfStateDesc);
}

TEST(SparqlToPgmr, NoUris) {
  std::string q = "select ?x where {  ?x ?p ?o }";
  auto conv = SparqlToPgmr(q, EntityMemory(), RelationMemory());
  EXPECT_TRUE(conv.query.bindings.empty());
  EXPECT_EQ(conv.query.template_text, CollapseWhitespace(q));
  EXPECT_EQ(RenderPgmr(conv.query), conv.query.template_text);
}

TEST(SparqlToPgmr, FilmQueryTemplate) {
  auto conv = SparqlToPgmr(kFilmQuery, EntityMemory(), RelationMemory());
  EXPECT_EQ(conv.query.template_text,
            "select distinct ?sbj where { ?sbj relation1 entity1 . ?sbj relation2 entity2 }");
  ASSERT_EQ(conv.query.bindings.size(), 4u);
  // Substituting the recorded source URIs gives back the input URI sets.
  std::string back = SubstitutePlaceholders(conv.query.template_text, conv.uri_of);
  UriSets a = ExtractUris(back), b = ExtractUris(kFilmQuery);
  EXPECT_EQ(a.entities, b.entities);
  EXPECT_EQ(a.relations, b.relations);
  EXPECT_EQ(back, CollapseWhitespace(kFilmQuery));
}

TEST(SparqlToPgmr, UnknownUri) {
  try {
    SparqlToPgmr("ask { wd:q123456 wdt:p31 wd:q11424 }", EntityMemory(), RelationMemory());
    FAIL();
  } catch (const UnknownUri &e) {
    EXPECT_EQ(e.uri(), "wd:q123456");
  }
}

TEST(SparqlToPgmr, RepeatedUriSharesPlaceholder) {
  auto conv = SparqlToPgmr("ask { wd:q937 wdt:p26 ?x . ?x wdt:p26 wd:Q937 }",
                           EntityMemory(), RelationMemory());
  EXPECT_EQ(conv.query.bindings.size(), 2u);
  EXPECT_EQ(conv.query.template_text,
            "ask { entity1 relation1 ?x . ?x relation1 entity1 }");
}

TEST(SparqlToPgmr, QualifierPrefixesStay) {
  auto conv = SparqlToPgmr(
      "select ?o where { wd:q30 p:p35 ?s . ?s ps:p35 ?o . ?s pq:p31 ?q }",
      EntityMemory(), RelationMemory());
  EXPECT_EQ(conv.query.template_text,
            "select ?o where { entity1 p:relation1 ?s . ?s ps:relation1 ?o . ?s "
            "pq:relation2 ?q }");
  std::string back = SubstitutePlaceholders(conv.query.template_text, conv.uri_of);
  EXPECT_EQ(back, "select ?o where { wd:q30 p:p35 ?s . ?s ps:p35 ?o . ?s pq:p31 ?q }");
}

TEST(RenderPgmr, Shape) {
  auto conv = SparqlToPgmr("ask { wd:q937 ?p ?o }", EntityMemory(), RelationMemory());
  std::string text = RenderPgmr(conv.query);
  EXPECT_EQ(text, std::string("ask { entity1 ?p ?o }\n\nentity1 = [ENT] Albert Einstein "
                              "[/ENT] ") +
                      kEinsteinDesc);
  std::size_t tags = 0;
  for (std::size_t p = text.find("[ENT]"); p != std::string::npos;
       p = text.find("[ENT]", p + 1)) {
    ++tags;
  }
  EXPECT_EQ(tags, 1u);
}

TEST(ParsePgmr, Recovers) {
  std::string text =
      "select ?x where { entity1 relation1 ?x }\n\n"
      "entity1 = [ENT] Albert Einstein [/ENT] physicist\n"
      "relation1 = [REL] spouse [/REL] married to\n";
  IntermediateQuery q = ParsePgmr(text);
  EXPECT_EQ(q.template_text, "select ?x where { entity1 relation1 ?x }");
  ASSERT_EQ(q.bindings.size(), 2u);
  EXPECT_EQ(q.bindings[0],
            (PlaceholderBinding{"entity1", UriKind::kEntity, "Albert Einstein", "physicist"}));
  EXPECT_EQ(q.bindings[1],
            (PlaceholderBinding{"relation1", UriKind::kRelation, "spouse", "married to"}));
  EXPECT_TRUE(q.defects.empty());
}

TEST(ParsePgmr, EmptyDescription) {
  IntermediateQuery q =
      ParsePgmr("ask { entity1 ?p ?o }\n\nentity1 = [ENT] Albert Einstein [/ENT]");
  ASSERT_EQ(q.bindings.size(), 1u);
  EXPECT_EQ(q.bindings[0].description, "");
}

TEST(ParsePgmr, MissingBindingIsDefect) {
  IntermediateQuery q = ParsePgmr(
      "ask { entity1 wdt:p31 entity2 }\n\nentity1 = [ENT] Albert Einstein [/ENT] x");
  EXPECT_EQ(q.defects, std::vector<std::string>{"entity2"});
}

TEST(ParsePgmr, Tolerances) {
  // Fences, no blank line, duplicates (first wins) and unused bindings.
  IntermediateQuery q = ParsePgmr(
      "```sparql\nask { entity1 ?p ?o }\nentity1 = [ENT] A [/ENT] one\n"
      "entity1 = [ENT] B [/ENT] two\nentity7 = [ENT] C [/ENT]\n```\n");
  EXPECT_EQ(q.template_text, "ask { entity1 ?p ?o }");
  ASSERT_EQ(q.bindings.size(), 1u);
  EXPECT_EQ(q.bindings[0].label, "A");
}

TEST(ParsePgmr, MalformedInputs) {
  EXPECT_THROW(ParsePgmr("I cannot answer that question."), MalformedOutput);
  EXPECT_THROW(ParsePgmr("entity1 = [ENT] A [/ENT]"), MalformedOutput);
  EXPECT_THROW(ParsePgmr("ask { entity1 ?p ?o }\n\nentity1 = [ENT] A and more"),
               MalformedOutput);
  EXPECT_THROW(ParsePgmr("ask { entity1 ?p ?o }\n\nentity1 = [ENT] A [/REL] x"),
               MalformedOutput);
  EXPECT_THROW(ParsePgmr("ask { relation1 ?p ?o }\n\nrelation1 = [ENT] A [/ENT] x"),
               MalformedOutput);
  EXPECT_THROW(ParsePgmr("ask { entity1 ?p ?o }\n\nentity1 = [ENT] A [/ENT] x [/ENT]"),
               MalformedOutput);
}

TEST(TemplatePlaceholders, OrderAndPrefixes) {
  EXPECT_EQ(TemplatePlaceholders("ask { entity2 ps:relation1 entity1 . entity2 ?p entity02 }"),
            (std::vector<std::string>{"entity2", "relation1", "entity1"}));
  EXPECT_TRUE(ParsePlaceholderName("relation3"));
  EXPECT_FALSE(ParsePlaceholderName("entity0x"));
  EXPECT_FALSE(ParsePlaceholderName("entity01"));
}

// parse(render(iq)) == iq, and grounding the parsed query with the source
// URIs gives back the source, on generated corpora.
TEST(RoundTrip, ThousandGeneratedQueries) {
  SyntheticKg kg = GenerateKg({.entities = 300, .relations = 30, .seed = 21});
  Memory ents = Memory::FromRecords(UriKind::kEntity, kg.entities);
  Memory rels = Memory::FromRecords(UriKind::kRelation, kg.relations);
  auto corpus = GenerateCorpus(kg, 1000, 22);
  ASSERT_EQ(corpus.size(), 1000u);
  for (const auto &s : corpus) {
    PgmrConversion conv = SparqlToPgmr(s.gold_sparql, ents, rels);
    IntermediateQuery back = ParsePgmr(RenderPgmr(conv.query));
    ASSERT_EQ(back, conv.query) << s.gold_sparql;
    ASSERT_TRUE(back.defects.empty());
    std::string sparql = SubstitutePlaceholders(back.template_text, conv.uri_of);
    ASSERT_EQ(AsciiLower(sparql), AsciiLower(CollapseWhitespace(s.gold_sparql)));
    UriSets u = ExtractUris(s.gold_sparql);
    std::size_t ents_bound = 0;
    for (const auto &b : back.bindings) ents_bound += b.kind == UriKind::kEntity;
    EXPECT_EQ(ents_bound, u.entities.size());
    EXPECT_EQ(back.bindings.size() - ents_bound, u.relations.size());
  }
}

// Random bindings with awkward labels still survive render and parse.
TEST(RoundTrip, RandomBindings) {
  std::mt19937_64 rng(5);
  const std::vector<std::string> words = {"Mercury", "co-op", "São Paulo", "x=y",
                                          "[brackets]", "a  b", "relation", "entity",
                                          "100%", "über"};
  auto phrase = [&](int max) {
    std::string s;
    int n = 1 + static_cast<int>(rng() % max);
    for (int i = 0; i < n; ++i) s += (i ? " " : "") + words[rng() % words.size()];
    return CollapseWhitespace(s);
  };
  for (int i = 0; i < 1000; ++i) {
    IntermediateQuery q;
    int ne = static_cast<int>(rng() % 4), nr = static_cast<int>(rng() % 3);
    q.template_text = "select ?x where {";
    for (int e = 1; e <= ne; ++e) {
      q.template_text += " entity" + std::to_string(e) + " wdt:p31 ?x .";
      q.bindings.push_back({PlaceholderName(UriKind::kEntity, e), UriKind::kEntity,
                            phrase(3), rng() % 3 ? phrase(6) : ""});
    }
    for (int r = 1; r <= nr; ++r) {
      q.template_text += " ?x relation" + std::to_string(r) + " ?y .";
      q.bindings.push_back({PlaceholderName(UriKind::kRelation, r), UriKind::kRelation,
                            phrase(2), rng() % 3 ? phrase(6) : ""});
    }
    q.template_text += " }";
    ASSERT_EQ(ParsePgmr(RenderPgmr(q)), q) << RenderPgmr(q);
  }
}

}  // namespace
}  // namespace pgmr
