#ifndef PGMR_URI_H_
#define PGMR_URI_H_

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace pgmr {

// Entities are Wikidata Q-ids, relations (properties) are P-ids.
enum class UriKind : std::uint8_t { kEntity, kRelation };

const char *UriKindName(UriKind kind);

// A typed KG identifier. Identity is (kind, id); the canonical text is
// "wd:q<id>" for entities and "wdt:p<id>" for relations.
class UriRef {
 public:
  UriRef() = default;
  UriRef(UriKind kind, std::uint64_t id) : kind_(kind), id_(id) {}

  static UriRef Entity(std::uint64_t id) { return {UriKind::kEntity, id}; }
  static UriRef Relation(std::uint64_t id) { return {UriKind::kRelation, id}; }

  // Accepts "Q937", "wd:Q937", "wdt:P35", "p:P35", "ps:P35", "pq:P35" and
  // full <http://www.wikidata.org/...> IRIs, case-insensitively. Returns
  // nullopt for anything else.
  static std::optional<UriRef> Parse(std::string_view text);

  UriKind kind() const { return kind_; }
  std::uint64_t id() const { return id_; }
  bool is_entity() const { return kind_ == UriKind::kEntity; }

  std::string canonical_text() const;

  friend auto operator<=>(const UriRef &, const UriRef &) = default;

 private:
  UriKind kind_ = UriKind::kEntity;
  std::uint64_t id_ = 0;
};

// A URI as it occurs inside a query: the identity plus the namespace prefix
// it was written with ("wd", "wdt", "p", "ps", "pq").
struct UriOccurrence {
  UriRef ref;
  std::string prefix;

  // Lowercase prefixed form, e.g. "ps:p31".
  std::string text() const;
};

// Recognizes one query token as a Wikidata URI (prefixed name or full IRI).
std::optional<UriOccurrence> ParseUriToken(std::string_view token);

}  // namespace pgmr

template <>
struct std::hash<pgmr::UriRef> {
  std::size_t operator()(const pgmr::UriRef &u) const noexcept {
    return std::hash<std::uint64_t>()(u.id() * 2 +
                                      (u.is_entity() ? 0 : 1));
  }
};

#endif  // PGMR_URI_H_
