#include <gtest/gtest.h>

#include <random>

#include "fixtures.h"
#include "pgmr/error.h"
#include "pgmr/metrics.h"
#include "pgmr/sparql.h"
#include "random_queries.h"

namespace pgmr {
namespace {

using testing::kFilmQuery;

std::vector<std::string> UriTexts(std::string_view q) {
  std::vector<std::string> out;
  for (const auto &t : Tokenize(q)) {
    if (t.kind == TokenKind::kUri) out.push_back(t.text);
  }
  return out;
}

TEST(Tokenize, FilmQueryUris) {
  EXPECT_EQ(UriTexts(kFilmQuery),
            (std::vector<std::string>{"wdt:p1040", "wd:q8003", "wdt:p31", "wd:q11424"}));
  EXPECT_TRUE(Tokenize("").empty());
}

TEST(Tokenize, UpperCaseUrisCanonicalizeToLowercase) {
  std::string q = "ASK WHERE { wd:Q76 wdt:P26 ?x }";
  EXPECT_EQ(UriTexts(q), (std::vector<std::string>{"wd:Q76", "wdt:P26"}));
  CanonicalQuery c = Canonicalize(Parse(q));
  ASSERT_EQ(c.triples.size(), 1u);
  EXPECT_NE(c.triples[0].find("wd:q76"), std::string::npos);
  EXPECT_NE(c.triples[0].find("wdt:p26"), std::string::npos);
}

TEST(Tokenize, KindsAndPositions) {
  std::string q = "SELECT ?x WHERE { ?x rdfs:label \"a b\"@en . } # note\nLIMIT 3";
  auto toks = Tokenize(q);
  for (const auto &t : toks) EXPECT_EQ(q.substr(t.position, t.text.size()), t.text);
  auto find = [&](std::string_view text) {
    for (const auto &t : toks) if (t.text == text) return t.kind;
    ADD_FAILURE() << "no token " << text;
    return TokenKind::kSpace;
  };
  EXPECT_EQ(find("SELECT"), TokenKind::kKeyword);
  EXPECT_EQ(find("?x"), TokenKind::kVariable);
  EXPECT_EQ(find("rdfs:label"), TokenKind::kOther);
  EXPECT_EQ(find("\"a b\"@en"), TokenKind::kLiteral);
  EXPECT_EQ(find("# note"), TokenKind::kSpace);
  EXPECT_EQ(find("3"), TokenKind::kLiteral);
}

// Detokenize(Tokenize(s)) == s for arbitrary bytes, including broken
// strings and stray quotes.
TEST(Tokenize, LosslessOnRandomInput) {
  std::mt19937_64 rng(11);
  const std::string alphabet = "abcSELECTwdq:P?{}.()\"'#\n\t @^<>0123456789\\\x80\xc3";
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    int n = static_cast<int>(rng() % 60);
    for (int j = 0; j < n; ++j) s += alphabet[rng() % alphabet.size()];
    ASSERT_EQ(Detokenize(Tokenize(s)), s);
  }
  testing::QueryGenerator gen(12);
  for (int i = 0; i < 500; ++i) {
    std::string q = gen.Next().Text();
    ASSERT_EQ(Detokenize(Tokenize(q)), q);
  }
}

TEST(Parse, FilmQuery) {
  ParsedQuery p = Parse(kFilmQuery);
  EXPECT_EQ(p.triples.size(), 2u);
  EXPECT_EQ(p.parse_quality, ParseQuality::kFull);
  EXPECT_EQ(p.head_text, "select distinct ?sbj where");
  EXPECT_EQ(Canonicalize(p).head, "select distinct ?var0 where");
  EXPECT_EQ(p.triples[0].predicate.uri->ref, UriRef::Relation(1040));
}

TEST(Parse, EmptyGroup) {
  ParsedQuery p = Parse("select ?x where { }");
  EXPECT_TRUE(p.triples.empty());
  EXPECT_TRUE(p.has_group);
}

TEST(Parse, FilterIsOpaque) {
  std::string q = "SELECT ?x WHERE { ?x wdt:P1082 ?y . FILTER(?y > 5) }";
  ParsedQuery p = Parse(q);
  ASSERT_EQ(p.triples.size(), 2u);
  EXPECT_EQ(p.parse_quality, ParseQuality::kPartial);
  EXPECT_FALSE(p.triples[0].is_block());
  ASSERT_TRUE(p.triples[1].is_block());
  EXPECT_EQ(p.triples[1].subject.text, "FILTER(?y > 5)");
}

TEST(Parse, UnbalancedBracesThrow) {
  try {
    Parse("select ?x where { ?x wdt:p31 wd:q5 ");
    FAIL();
  } catch (const SyntaxError &e) {
    EXPECT_EQ(e.offset(), 16u);
  }
  EXPECT_THROW(Parse("select ?x where } {"), SyntaxError);
}

TEST(ExtractUris, SplitsByKind) {
  UriSets s = ExtractUris(kFilmQuery);
  EXPECT_EQ(s.entities, (std::set<UriRef>{UriRef::Entity(8003), UriRef::Entity(11424)}));
  EXPECT_EQ(s.relations, (std::set<UriRef>{UriRef::Relation(1040), UriRef::Relation(31)}));
  UriSets none = ExtractUris("select ?x where { ?x ?p ?o }");
  EXPECT_TRUE(none.entities.empty() && none.relations.empty());
  UriSets dup = ExtractUris("ask { wd:Q937 wdt:p31 wd:q937 }");
  EXPECT_EQ(dup.entities.size(), 1u);
}

TEST(Canonicalize, VariableNamesDoNotMatter) {
  auto a = Canonicalize(Parse("select ?value where { ?value wdt:p26 wd:q76 }"));
  auto b = Canonicalize(Parse("select ?uri where { ?uri wdt:p26 wd:q76 }"));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.triples, b.triples);
}

TEST(Canonicalize, SwappedTriples) {
  auto a = Canonicalize(Parse(kFilmQuery));
  auto b = Canonicalize(Parse(
      "select distinct ?sbj where { ?sbj wdt:p31 wd:q11424 . ?sbj wdt:p1040 wd:q8003 }"));
  EXPECT_EQ(a.triple_multiset, b.triple_multiset);
  EXPECT_NE(a.triples, b.triples);
  EXPECT_EQ(a, b);
}

TEST(Canonicalize, WithinTriplePermutationFlag) {
  std::string a = "ask { wd:q1 wdt:p2 wd:q3 }";
  std::string b = "ask { wd:q3 wdt:p2 wd:q1 }";
  EXPECT_FALSE(Sqm(a, b));
  EXPECT_TRUE(Sqm(a, b, {.within_triple_permutation = true}));
}

// canonicalize(parse(render(c))) == c.
TEST(Canonicalize, IdempotentOnRandomQueries) {
  testing::QueryGenerator gen(3);
  for (int i = 0; i < 500; ++i) {
    std::string q = gen.Next().Text();
    CanonicalQuery c = Canonicalize(Parse(q));
    std::string rendered = RenderCanonical(c);
    CanonicalQuery again = Canonicalize(Parse(rendered));
    ASSERT_EQ(again, c) << q << "\n" << rendered;
    ASSERT_EQ(RenderCanonical(again), rendered);
  }
  std::string filter =
      "SELECT ?x WHERE { ?x wdt:P1082 ?y . FILTER(?y > 5) } ORDER BY ?y LIMIT 2";
  CanonicalQuery c = Canonicalize(Parse(filter));
  EXPECT_EQ(Canonicalize(Parse(RenderCanonical(c))), c);
}

// Distinct source variables get distinct canonical names.
TEST(Canonicalize, RenamingIsABijection) {
  testing::QueryGenerator gen(4);
  for (int i = 0; i < 300; ++i) {
    testing::RandomQuery q = gen.Next();
    std::string rendered = RenderCanonical(Canonicalize(Parse(q.Text())));
    auto vars = [](std::string_view text) {
      std::set<std::string> out;
      for (const auto &t : Tokenize(text)) {
        if (t.kind == TokenKind::kVariable) out.insert(t.text);
      }
      return out;
    };
    std::set<std::string> canon = vars(rendered);
    std::size_t source = vars(q.Text()).size();
    ASSERT_EQ(canon.size(), source) << q.Text() << "\n" << rendered;
  }
}

TEST(Canonicalize, PermutationInvariance) {
  testing::QueryGenerator gen(5);
  for (int i = 0; i < 200; ++i) {
    testing::RandomQuery q = gen.Next();
    CanonicalQuery base = Canonicalize(Parse(q.Text()));
    std::vector<std::size_t> order(q.triples.size());
    std::iota(order.begin(), order.end(), 0);
    do {
      testing::RandomQuery p = q;
      for (std::size_t j = 0; j < order.size(); ++j) p.triples[j] = q.triples[order[j]];
      ASSERT_EQ(Canonicalize(Parse(p.Text())).triple_multiset, base.triple_multiset)
          << q.Text() << "\n" << p.Text();
    } while (std::next_permutation(order.begin(), order.end()));
  }
}

}  // namespace
}  // namespace pgmr
