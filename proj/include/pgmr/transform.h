#ifndef PGMR_TRANSFORM_H_
#define PGMR_TRANSFORM_H_

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pgmr/kg_store.h"
#include "pgmr/uri.h"

namespace pgmr {

// One line of the mapping block:
//   entityN = [ENT] label [/ENT] description
//   relationN = [REL] label [/REL] description
struct PlaceholderBinding {
  std::string name;  // "entity1", "relation2", ...
  UriKind kind = UriKind::kEntity;
  std::string label;
  std::string description;

  std::string Serialize() const;

  bool operator==(const PlaceholderBinding &) const = default;
};

// Kind and 1-based index of a placeholder name; nullopt if `name` is not
// of the form entityN / relationN.
std::optional<std::pair<UriKind, int>> ParsePlaceholderName(
    std::string_view name);

std::string PlaceholderName(UriKind kind, int index);

// A SPARQL template with placeholders in URI positions plus its mapping
// block. Placeholders may carry a namespace (e.g. "ps:relation1") when the
// source URI used one other than wd:/wdt:.
struct IntermediateQuery {
  std::string template_text;
  std::vector<PlaceholderBinding> bindings;  // entities, then relations
  std::string raw;                           // set by ParsePgmr
  // Placeholders in the template that have no binding (ParsePgmr only).
  std::vector<std::string> defects;

  const PlaceholderBinding *Binding(std::string_view name) const;

  // Template and bindings; raw text and defects are not compared.
  bool operator==(const IntermediateQuery &other) const {
    return template_text == other.template_text && bindings == other.bindings;
  }
};

struct PgmrConversion {
  IntermediateQuery query;
  // Source URI of every placeholder.
  std::map<std::string, UriRef> uri_of;
};

// Replaces entity URIs (entity1, entity2, ... by first occurrence), then
// relation URIs (relation1, ...), and builds the mapping block from the
// memories. Whitespace in the template is collapsed. Throws UnknownUri if a
// URI has no record.
PgmrConversion SparqlToPgmr(std::string_view query, const Memory &entities,
                            const Memory &relations);

// Template, blank line, one binding per line. Bindings are emitted entities
// first, each kind by index.
std::string RenderPgmr(const IntermediateQuery &query);

// Reads model output. Tolerates a missing blank line, code fences,
// duplicate binding lines (first wins) and bindings without placeholders
// (dropped). Placeholders without a binding are listed in `defects`.
// Throws MalformedOutput if there is no query block or a [ENT]/[REL] tag
// is unpaired.
IntermediateQuery ParsePgmr(std::string_view text);

// Placeholder names occurring in a template, in order of first occurrence.
std::vector<std::string> TemplatePlaceholders(std::string_view template_text);

// Replaces each placeholder token with the URI chosen for it. Relation
// placeholders written with a namespace keep it ("ps:relation1" ->
// "ps:p31"); bare ones become wd:qN / wdt:pN.
std::string SubstitutePlaceholders(std::string_view template_text,
                                   const std::map<std::string, UriRef> &uris);

}  // namespace pgmr

#endif  // PGMR_TRANSFORM_H_
