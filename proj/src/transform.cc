#include "pgmr/transform.h"

#include <algorithm>
#include <set>

#include "pgmr/error.h"
#include "pgmr/sparql.h"
#include "pgmr/text.h"

namespace pgmr {
namespace {

constexpr std::string_view kNamespaces[] = {"wd", "wdt", "p", "ps", "pq"};

struct PlaceholderToken {
  std::string ns;  // empty when bare
  std::string name;
  UriKind kind;
  int index;
};

std::optional<PlaceholderToken> AsPlaceholder(const SparqlToken &t) {
  if (t.kind != TokenKind::kOther) return std::nullopt;
  std::string_view text = t.text;
  std::string ns;
  if (size_t colon = text.find(':'); colon != std::string_view::npos) {
    std::string_view prefix = text.substr(0, colon);
    if (std::find(std::begin(kNamespaces), std::end(kNamespaces), prefix) ==
        std::end(kNamespaces)) {
      return std::nullopt;
    }
    ns = std::string(prefix);
    text.remove_prefix(colon + 1);
  }
  auto parsed = ParsePlaceholderName(text);
  if (!parsed) return std::nullopt;
  return PlaceholderToken{ns, std::string(text), parsed->first, parsed->second};
}

// Re-joins tokens, collapsing whitespace and comments to single spaces.
class TemplateWriter {
 public:
  void Space() { pending_ = !out_.empty(); }
  void Text(std::string_view s) {
    if (pending_) out_.push_back(' ');
    pending_ = false;
    out_ += s;
  }
  std::string Take() { return std::move(out_); }

 private:
  std::string out_;
  bool pending_ = false;
};

bool KindOrder(const PlaceholderBinding &a, const PlaceholderBinding &b) {
  auto pa = ParsePlaceholderName(a.name);
  auto pb = ParsePlaceholderName(b.name);
  if (pa->first != pb->first) return pa->first == UriKind::kEntity;
  return pa->second < pb->second;
}

struct Header {
  std::size_t start;          // first byte of the name
  std::size_t content_start;  // first byte after the open tag
  std::size_t tag_pos;
  std::string name;
  UriKind tag_kind;
};

std::string StripFences(std::string_view text) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::size_t end = nl == std::string_view::npos ? text.size() : nl + 1;
    std::string_view line = text.substr(pos, end - pos);
    if (Trim(line).substr(0, 3) != "```") {
      out += line;
    } else {
      // Keep offsets stable.
      out += std::string(line.size(), ' ');
      if (line.back() == '\n') out.back() = '\n';
    }
    pos = end;
  }
  return out;
}

// Finds "name = [ENT]" / "name = [REL]" headers in order.
std::vector<Header> FindHeaders(const std::string &text) {
  std::vector<Header> headers;
  for (std::size_t p = text.find('['); p != std::string::npos;
       p = text.find('[', p + 1)) {
    std::string_view rest = std::string_view(text).substr(p);
    UriKind kind;
    if (rest.substr(0, 5) == "[ENT]") {
      kind = UriKind::kEntity;
    } else if (rest.substr(0, 5) == "[REL]") {
      kind = UriKind::kRelation;
    } else {
      continue;
    }
    std::size_t q = p;
    while (q > 0 && (text[q - 1] == ' ' || text[q - 1] == '\t')) --q;
    if (q == 0 || text[q - 1] != '=') {
      throw MalformedOutput(
          "special tag without placeholder name at offset " + std::to_string(p),
          p);
    }
    --q;
    while (q > 0 && (text[q - 1] == ' ' || text[q - 1] == '\t')) --q;
    std::size_t name_end = q;
    while (q > 0 && std::isalnum(static_cast<unsigned char>(text[q - 1]))) --q;
    std::string name = text.substr(q, name_end - q);
    if (!ParsePlaceholderName(name) || (q > 0 && !IsSpace(text[q - 1]))) {
      throw MalformedOutput(
          "special tag without placeholder name at offset " + std::to_string(p),
          p);
    }
    headers.push_back({q, p + 5, p, std::move(name), kind});
  }
  return headers;
}

bool HasQueryForm(std::string_view block) {
  bool form = false;
  bool brace = false;
  for (const auto &t : Tokenize(block)) {
    if (t.kind == TokenKind::kKeyword) {
      std::string k = AsciiLower(t.text);
      if (k == "select" || k == "ask" || k == "construct" || k == "describe") {
        form = true;
      }
    }
    if (t.kind == TokenKind::kPunct && t.text == "{") brace = true;
  }
  return form && brace;
}

}  // namespace

std::optional<std::pair<UriKind, int>> ParsePlaceholderName(
    std::string_view name) {
  UriKind kind;
  if (name.rfind("entity", 0) == 0) {
    kind = UriKind::kEntity;
    name.remove_prefix(6);
  } else if (name.rfind("relation", 0) == 0) {
    kind = UriKind::kRelation;
    name.remove_prefix(8);
  } else {
    return std::nullopt;
  }
  if (name.empty() || name.size() > 6 || name[0] == '0') return std::nullopt;
  int index = 0;
  for (char c : name) {
    if (c < '0' || c > '9') return std::nullopt;
    index = index * 10 + (c - '0');
  }
  return std::make_pair(kind, index);
}

std::string PlaceholderName(UriKind kind, int index) {
  return (kind == UriKind::kEntity ? "entity" : "relation") +
         std::to_string(index);
}

std::string PlaceholderBinding::Serialize() const {
  const char *open = kind == UriKind::kEntity ? "[ENT]" : "[REL]";
  const char *close = kind == UriKind::kEntity ? "[/ENT]" : "[/REL]";
  std::string out = name + " = " + open + " " + label + " " + close;
  if (!description.empty()) out += " " + description;
  return out;
}

const PlaceholderBinding *IntermediateQuery::Binding(
    std::string_view name) const {
  for (const auto &b : bindings) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

PgmrConversion SparqlToPgmr(std::string_view query, const Memory &entities,
                            const Memory &relations) {
  auto tokens = Tokenize(query);
  std::map<UriRef, int> entity_index;
  std::map<UriRef, int> relation_index;
  std::vector<UriRef> entity_order;
  std::vector<UriRef> relation_order;
  for (const auto &t : tokens) {
    if (t.kind != TokenKind::kUri) continue;
    UriRef ref = ParseUriToken(t.text)->ref;
    auto &index = ref.is_entity() ? entity_index : relation_index;
    auto &order = ref.is_entity() ? entity_order : relation_order;
    if (index.emplace(ref, static_cast<int>(order.size()) + 1).second) {
      order.push_back(ref);
    }
  }

  PgmrConversion out;
  auto bind = [&](const std::vector<UriRef> &order, const Memory &memory) {
    for (std::size_t i = 0; i < order.size(); ++i) {
      const KgRecord *rec = memory.Find(order[i]);
      if (rec == nullptr) throw UnknownUri(order[i].canonical_text());
      PlaceholderBinding b;
      b.kind = order[i].kind();
      b.name = PlaceholderName(b.kind, static_cast<int>(i) + 1);
      b.label = std::string(Trim(rec->label));
      b.description = CollapseWhitespace(rec->description);
      out.uri_of.emplace(b.name, order[i]);
      out.query.bindings.push_back(std::move(b));
    }
  };
  bind(entity_order, entities);
  bind(relation_order, relations);

  TemplateWriter w;
  for (const auto &t : tokens) {
    if (t.kind == TokenKind::kSpace) {
      w.Space();
      continue;
    }
    if (t.kind != TokenKind::kUri) {
      w.Text(t.text);
      continue;
    }
    UriOccurrence occ = *ParseUriToken(t.text);
    if (occ.ref.is_entity()) {
      w.Text(PlaceholderName(UriKind::kEntity, entity_index[occ.ref]));
    } else {
      std::string name =
          PlaceholderName(UriKind::kRelation, relation_index[occ.ref]);
      w.Text(occ.prefix == "wdt" ? name : occ.prefix + ":" + name);
    }
  }
  out.query.template_text = w.Take();
  return out;
}

std::string RenderPgmr(const IntermediateQuery &query) {
  std::string out = query.template_text;
  std::vector<PlaceholderBinding> sorted = query.bindings;
  std::stable_sort(sorted.begin(), sorted.end(), KindOrder);
  if (!sorted.empty()) out += "\n";
  for (const auto &b : sorted) out += "\n" + b.Serialize();
  return out;
}

std::vector<std::string> TemplatePlaceholders(std::string_view template_text) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto &t : Tokenize(template_text)) {
    auto ph = AsPlaceholder(t);
    if (ph && seen.insert(ph->name).second) out.push_back(ph->name);
  }
  return out;
}

std::string SubstitutePlaceholders(std::string_view template_text,
                                   const std::map<std::string, UriRef> &uris) {
  std::string out;
  for (const auto &t : Tokenize(template_text)) {
    auto ph = AsPlaceholder(t);
    auto it = ph ? uris.find(ph->name) : uris.end();
    if (it == uris.end()) {
      out += t.text;
      continue;
    }
    const UriRef &ref = it->second;
    std::string ns = ph->ns;
    if (ns.empty() || (ref.is_entity() && ns != "wd")) {
      ns = ref.is_entity() ? "wd" : "wdt";
    }
    out += UriOccurrence{ref, ns}.text();
  }
  return out;
}

IntermediateQuery ParsePgmr(std::string_view input) {
  std::string text = StripFences(input);
  std::vector<Header> headers = FindHeaders(text);

  std::size_t block_end = headers.empty() ? text.size() : headers.front().start;
  std::string_view block = Trim(std::string_view(text).substr(0, block_end));
  if (block.empty() || !HasQueryForm(block)) {
    throw MalformedOutput("no recognizable query block");
  }

  IntermediateQuery iq;
  iq.raw = std::string(input);
  iq.template_text = std::string(block);

  std::set<std::size_t> consumed_closes;
  std::map<std::string, PlaceholderBinding> found;
  for (std::size_t h = 0; h < headers.size(); ++h) {
    const Header &hd = headers[h];
    std::size_t region_end =
        h + 1 < headers.size() ? headers[h + 1].start : text.size();
    auto kind = ParsePlaceholderName(hd.name)->first;
    if (kind != hd.tag_kind) {
      throw MalformedOutput(hd.name + " tagged with the wrong kind at offset " +
                                std::to_string(hd.tag_pos),
                            hd.tag_pos);
    }
    std::string_view close_tag = kind == UriKind::kEntity ? "[/ENT]" : "[/REL]";
    std::string_view other_tag = kind == UriKind::kEntity ? "[/REL]" : "[/ENT]";
    std::string_view region = std::string_view(text).substr(0, region_end);
    std::size_t close = region.find(close_tag, hd.content_start);
    std::size_t other = region.find(other_tag, hd.content_start);
    if (close == std::string_view::npos || other < close) {
      throw MalformedOutput("unpaired tag at offset " + std::to_string(hd.tag_pos),
                            hd.tag_pos);
    }
    consumed_closes.insert(close);
    std::size_t desc_start = close + close_tag.size();
    std::size_t desc_end = region.find('\n', desc_start);
    if (desc_end == std::string_view::npos) desc_end = region_end;

    PlaceholderBinding b;
    b.name = hd.name;
    b.kind = kind;
    b.label = std::string(Trim(region.substr(hd.content_start, close - hd.content_start)));
    b.description = std::string(Trim(region.substr(desc_start, desc_end - desc_start)));
    found.emplace(b.name, std::move(b));  // first wins
  }
  for (std::string_view tag : {"[/ENT]", "[/REL]"}) {
    for (std::size_t p = text.find(tag); p != std::string::npos;
         p = text.find(tag, p + 1)) {
      if (!consumed_closes.count(p)) {
        throw MalformedOutput("unpaired tag at offset " + std::to_string(p), p);
      }
    }
  }

  for (const auto &name : TemplatePlaceholders(iq.template_text)) {
    auto it = found.find(name);
    if (it == found.end()) {
      iq.defects.push_back(name);
    } else {
      iq.bindings.push_back(it->second);
    }
  }
  std::stable_sort(iq.bindings.begin(), iq.bindings.end(), KindOrder);
  return iq;
}

}  // namespace pgmr
