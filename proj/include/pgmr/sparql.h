#ifndef PGMR_SPARQL_H_
#define PGMR_SPARQL_H_

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pgmr/uri.h"

namespace pgmr {

enum class TokenKind {
  kKeyword,
  kVariable,
  kUri,      // Wikidata URI (prefixed or full IRI)
  kLiteral,  // strings with optional lang tag / datatype, numbers
  kPunct,
  kOther,    // any other IRI, prefixed name, bare word or unknown byte
  kSpace,    // whitespace runs and '#' comments
};

struct SparqlToken {
  TokenKind kind;
  std::string text;
  std::size_t position;  // byte offset in the input
};

// Lossless lexer for the restricted dialect. Never fails.
std::vector<SparqlToken> Tokenize(std::string_view query);

// Concatenates token texts; Detokenize(Tokenize(q)) == q.
std::string Detokenize(const std::vector<SparqlToken> &tokens);

// One position of a triple pattern.
struct Term {
  enum class Kind { kVariable, kUri, kLiteral, kOpaque };
  Kind kind = Kind::kOpaque;
  std::string text;
  // Set when the term is a Wikidata URI. Other IRIs and prefixed names
  // (rdfs:label, the keyword `a`) are kUri with no occurrence.
  std::optional<UriOccurrence> uri;
};

// A subject-predicate-object pattern. Constructs the parser does not model
// (FILTER, OPTIONAL, UNION, nested groups, ...) are kept as a single block
// whose subject is an opaque term holding the original text and whose
// predicate and object are empty opaque terms.
struct TriplePattern {
  Term subject;
  Term predicate;
  Term object;

  static TriplePattern Block(std::string text);
  bool is_block() const;
};

enum class ParseQuality { kFull, kPartial };

struct ParsedQuery {
  std::string head_text;  // before the top-level group, whitespace collapsed
  std::vector<TriplePattern> triples;
  std::string tail_text;  // after the top-level group, whitespace collapsed
  std::string raw;
  bool has_group = false;
  ParseQuality parse_quality = ParseQuality::kFull;
};

// Locates the top-level WHERE group by balanced-brace scanning and splits
// its body into triples. Throws SyntaxError on unbalanced braces.
ParsedQuery Parse(std::string_view query);

struct UriSets {
  std::set<UriRef> entities;
  std::set<UriRef> relations;
};

// Deduplicated Wikidata URIs in `query`, split by kind.
UriSets ExtractUris(std::string_view query);

struct CanonicalizeOptions {
  // Treat subject and object of a plain triple as unordered.
  bool within_triple_permutation = false;
};

struct CanonicalQuery {
  std::string head;
  std::vector<std::string> triples;         // original order
  std::vector<std::string> triple_multiset;  // sorted
  std::string tail;
  bool has_group = false;

  // Head, tail and the triple multiset; the ordered list is informational.
  bool operator==(const CanonicalQuery &other) const {
    return head == other.head && triple_multiset == other.triple_multiset &&
           tail == other.tail && has_group == other.has_group;
  }
};

// Renames variables to ?var0, ?var1, ... and lowercases everything except
// literal contents. Head variables are numbered by first appearance; the
// remaining variables are numbered by a canonical traversal of the WHERE
// elements, so the result does not depend on the order of the triples.
CanonicalQuery Canonicalize(const ParsedQuery &parsed,
                            const CanonicalizeOptions &options = {});

// Serializes a canonical query back to SPARQL text.
std::string RenderCanonical(const CanonicalQuery &canonical);

}  // namespace pgmr

#endif  // PGMR_SPARQL_H_
