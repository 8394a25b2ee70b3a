#include "pgmr/uri.h"

#include <array>
#include <cctype>

#include "pgmr/text.h"

namespace pgmr {
namespace {

struct IriNamespace {
  std::string_view path;
  std::string_view prefix;
};

// Longest paths first so "prop/direct/" wins over "prop/".
constexpr std::array<IriNamespace, 5> kIriNamespaces = {{
    {"www.wikidata.org/prop/direct/", "wdt"},
    {"www.wikidata.org/prop/statement/", "ps"},
    {"www.wikidata.org/prop/qualifier/", "pq"},
    {"www.wikidata.org/prop/", "p"},
    {"www.wikidata.org/entity/", "wd"},
}};

bool IEquals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

bool StartsWithI(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && IEquals(s.substr(0, prefix.size()), prefix);
}

// Parses "Q937" / "p35" into a reference.
std::optional<UriRef> ParseLocal(std::string_view local) {
  if (local.size() < 2 || local.size() > 19) return std::nullopt;
  char letter = static_cast<char>(std::tolower(static_cast<unsigned char>(local[0])));
  if (letter != 'q' && letter != 'p') return std::nullopt;
  std::uint64_t id = 0;
  for (char c : local.substr(1)) {
    if (c < '0' || c > '9') return std::nullopt;
    id = id * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return UriRef(letter == 'q' ? UriKind::kEntity : UriKind::kRelation, id);
}

std::optional<UriOccurrence> FromPrefixed(std::string_view prefix,
                                          std::string_view local) {
  auto ref = ParseLocal(local);
  if (!ref) return std::nullopt;
  std::string p = AsciiLower(prefix);
  if (p == "wd") return UriOccurrence{*ref, p};
  if ((p == "wdt" || p == "p" || p == "ps" || p == "pq") && !ref->is_entity()) {
    return UriOccurrence{*ref, p};
  }
  return std::nullopt;
}

}  // namespace

const char *UriKindName(UriKind kind) {
  return kind == UriKind::kEntity ? "entity" : "relation";
}

std::string UriRef::canonical_text() const {
  return (is_entity() ? "wd:q" : "wdt:p") + std::to_string(id_);
}

std::string UriOccurrence::text() const {
  return prefix + ":" + (ref.is_entity() ? "q" : "p") + std::to_string(ref.id());
}

std::optional<UriOccurrence> ParseUriToken(std::string_view token) {
  if (token.size() > 2 && token.front() == '<' && token.back() == '>') {
    std::string_view iri = token.substr(1, token.size() - 2);
    if (StartsWithI(iri, "https://")) {
      iri.remove_prefix(8);
    } else if (StartsWithI(iri, "http://")) {
      iri.remove_prefix(7);
    } else {
      return std::nullopt;
    }
    for (const auto &ns : kIriNamespaces) {
      if (StartsWithI(iri, ns.path)) {
        return FromPrefixed(ns.prefix, iri.substr(ns.path.size()));
      }
    }
    return std::nullopt;
  }
  size_t colon = token.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  return FromPrefixed(token.substr(0, colon), token.substr(colon + 1));
}

std::optional<UriRef> UriRef::Parse(std::string_view text) {
  text = Trim(text);
  if (auto occ = ParseUriToken(text)) return occ->ref;
  if (text.find(':') == std::string_view::npos) return ParseLocal(text);
  return std::nullopt;
}

}  // namespace pgmr
