#include "pgmr/sparql.h"

#include <algorithm>
#include <map>
#include <unordered_set>

#include "pgmr/error.h"
#include "pgmr/text.h"

namespace pgmr {
namespace {

const std::unordered_set<std::string> &Keywords() {
  static const auto *kKeywords = new std::unordered_set<std::string>{
      "select", "ask", "construct", "describe", "distinct", "reduced",
      "where", "filter", "optional", "union", "minus", "graph", "service",
      "bind", "as", "values", "limit", "offset", "order", "by", "group",
      "having", "asc", "desc", "count", "sum", "min", "max", "avg", "sample",
      "group_concat", "separator", "prefix", "base", "not", "exists", "in",
      "from", "named", "undef", "lang", "langmatches", "str", "contains",
      "strstarts", "strends", "regex", "lcase", "ucase", "year", "month",
      "day", "now", "bound", "if", "coalesce", "isiri", "isuri", "isliteral",
      "datatype", "true", "false", "strlen", "substr", "concat", "abs",
      "ceil", "floor", "round", "rand", "iri", "uri", "silent"};
  return *kKeywords;
}

bool IsNameStart(unsigned char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_' ||
         c >= 0x80;
}

bool IsNameChar(unsigned char c) {
  return IsNameStart(c) || (c >= '0' && c <= '9') || c == '-';
}

bool IsDigit(char c) { return c >= '0' && c <= '9'; }

// Length of one UTF-8 sequence starting at s[i] (1 for invalid bytes).
size_t Utf8Length(std::string_view s, size_t i) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  size_t n = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3
           : (c >> 3) == 0x1e ? 4 : 1;
  return std::min(n, s.size() - i);
}

class Lexer {
 public:
  explicit Lexer(std::string_view s) : s_(s) {}

  std::vector<SparqlToken> Run() {
    std::vector<SparqlToken> out;
    while (i_ < s_.size()) {
      size_t start = i_;
      TokenKind kind = Next();
      out.push_back({kind, std::string(s_.substr(start, i_ - start)), start});
    }
    return out;
  }

 private:
  char At(size_t j) const { return j < s_.size() ? s_[j] : '\0'; }

  TokenKind Next() {
    char c = s_[i_];
    if (IsSpace(c)) {
      while (i_ < s_.size() && IsSpace(s_[i_])) ++i_;
      return TokenKind::kSpace;
    }
    if (c == '#') {
      while (i_ < s_.size() && s_[i_] != '\n') ++i_;
      return TokenKind::kSpace;
    }
    if ((c == '?' || c == '$') &&
        IsNameChar(static_cast<unsigned char>(At(i_ + 1))) &&
        At(i_ + 1) != '-') {
      ++i_;
      while (i_ < s_.size() && IsNameChar(static_cast<unsigned char>(s_[i_])) &&
             s_[i_] != '-') {
        ++i_;
      }
      return TokenKind::kVariable;
    }
    if (c == '"' || c == '\'') return String();
    if (c == '<') {
      if (auto kind = IriRef()) return *kind;
    }
    if (IsDigit(c)) return Number();
    if (IsNameStart(static_cast<unsigned char>(c)) || c == ':') return Name();
    return Punct();
  }

  TokenKind String() {
    char quote = s_[i_];
    bool triple = At(i_ + 1) == quote && At(i_ + 2) == quote;
    i_ += triple ? 3 : 1;
    while (i_ < s_.size()) {
      if (s_[i_] == '\\') {
        i_ += 2;
        continue;
      }
      if (s_[i_] == quote) {
        if (!triple) {
          ++i_;
          break;
        }
        if (At(i_ + 1) == quote && At(i_ + 2) == quote) {
          i_ += 3;
          break;
        }
      }
      ++i_;
    }
    i_ = std::min(i_, s_.size());
    // Language tag or datatype.
    if (At(i_) == '@' && IsNameStart(static_cast<unsigned char>(At(i_ + 1)))) {
      ++i_;
      while (i_ < s_.size() &&
             (IsNameChar(static_cast<unsigned char>(s_[i_])))) {
        ++i_;
      }
    } else if (At(i_) == '^' && At(i_ + 1) == '^') {
      size_t save = i_;
      i_ += 2;
      if (At(i_) == '<') {
        if (!IriRef()) i_ = save;
      } else if (IsNameStart(static_cast<unsigned char>(At(i_))) ||
                 At(i_) == ':') {
        Name();
      } else {
        i_ = save;
      }
    }
    return TokenKind::kLiteral;
  }

  // IRIREF per the SPARQL grammar; returns nullopt if `<` is an operator.
  std::optional<TokenKind> IriRef() {
    size_t j = i_ + 1;
    while (j < s_.size()) {
      unsigned char c = static_cast<unsigned char>(s_[j]);
      if (c == '>') break;
      if (c <= 0x20 || c == '<' || c == '"' || c == '{' || c == '}' ||
          c == '|' || c == '^' || c == '`' || c == '\\') {
        return std::nullopt;
      }
      ++j;
    }
    if (j >= s_.size()) return std::nullopt;
    std::string_view text = s_.substr(i_, j + 1 - i_);
    i_ = j + 1;
    return ParseUriToken(text) ? TokenKind::kUri : TokenKind::kOther;
  }

  TokenKind Number() {
    while (IsDigit(At(i_))) ++i_;
    if (At(i_) == '.' && IsDigit(At(i_ + 1))) {
      ++i_;
      while (IsDigit(At(i_))) ++i_;
    }
    if ((At(i_) == 'e' || At(i_) == 'E') &&
        (IsDigit(At(i_ + 1)) ||
         ((At(i_ + 1) == '+' || At(i_ + 1) == '-') && IsDigit(At(i_ + 2))))) {
      i_ += 2;
      while (IsDigit(At(i_))) ++i_;
    }
    return TokenKind::kLiteral;
  }

  void ConsumeNameChars(bool allow_colon) {
    while (i_ < s_.size()) {
      unsigned char c = static_cast<unsigned char>(s_[i_]);
      if (IsNameChar(c) || (allow_colon && (c == ':' || c == '%'))) {
        ++i_;
      } else if (c == '.' && IsNameChar(static_cast<unsigned char>(At(i_ + 1)))) {
        ++i_;
      } else {
        break;
      }
    }
  }

  TokenKind Name() {
    size_t start = i_;
    ConsumeNameChars(false);
    bool prefixed = false;
    if (At(i_) == ':') {
      prefixed = true;
      ++i_;
      ConsumeNameChars(true);
    }
    std::string_view text = s_.substr(start, i_ - start);
    if (prefixed) {
      return ParseUriToken(text) ? TokenKind::kUri : TokenKind::kOther;
    }
    if (text == "a") return TokenKind::kKeyword;
    return Keywords().count(AsciiLower(text)) ? TokenKind::kKeyword
                                              : TokenKind::kOther;
  }

  TokenKind Punct() {
    static constexpr std::string_view kTwoChar[] = {"&&", "||", "!=", "<=",
                                                    ">=", "^^"};
    for (std::string_view op : kTwoChar) {
      if (s_.substr(i_, 2) == op) {
        i_ += 2;
        return TokenKind::kPunct;
      }
    }
    static constexpr std::string_view kSingle = "{}()[].,;=<>!+-*/|^@?";
    if (kSingle.find(s_[i_]) != std::string_view::npos) {
      ++i_;
      return TokenKind::kPunct;
    }
    i_ += Utf8Length(s_, i_);
    return TokenKind::kOther;
  }

  std::string_view s_;
  size_t i_ = 0;
};

bool IsPunct(const SparqlToken &t, std::string_view text) {
  return t.kind == TokenKind::kPunct && t.text == text;
}

bool IsKeyword(const SparqlToken &t, std::string_view lower) {
  return t.kind == TokenKind::kKeyword && AsciiLower(t.text) == lower;
}

std::vector<SparqlToken> Significant(const std::vector<SparqlToken> &tokens) {
  std::vector<SparqlToken> out;
  for (const auto &t : tokens) {
    if (t.kind != TokenKind::kSpace) out.push_back(t);
  }
  return out;
}

// Index of the bracket closing the one at `open` within `toks`, tracking
// all three bracket types; returns toks.size() if unbalanced.
size_t MatchClose(const std::vector<SparqlToken> &toks, size_t open) {
  int depth = 0;
  for (size_t j = open; j < toks.size(); ++j) {
    const auto &t = toks[j];
    if (t.kind != TokenKind::kPunct) continue;
    if (t.text == "{" || t.text == "(" || t.text == "[") ++depth;
    if (t.text == "}" || t.text == ")" || t.text == "]") {
      if (--depth == 0) return j;
    }
  }
  return toks.size();
}

std::string JoinTokens(const std::vector<SparqlToken> &toks, size_t begin,
                       size_t end) {
  std::string out;
  for (size_t j = begin; j < end; ++j) {
    if (!out.empty()) out.push_back(' ');
    out += toks[j].text;
  }
  return out;
}

bool IsBlockKeyword(const SparqlToken &t) {
  if (t.kind != TokenKind::kKeyword) return false;
  std::string k = AsciiLower(t.text);
  return k == "filter" || k == "bind" || k == "optional" || k == "minus" ||
         k == "graph" || k == "service" || k == "values";
}

Term MakeTerm(const SparqlToken &t) {
  Term term;
  term.text = t.text;
  switch (t.kind) {
    case TokenKind::kVariable:
      term.kind = Term::Kind::kVariable;
      break;
    case TokenKind::kUri:
      term.kind = Term::Kind::kUri;
      term.uri = ParseUriToken(t.text);
      break;
    case TokenKind::kLiteral:
      term.kind = Term::Kind::kLiteral;
      break;
    case TokenKind::kKeyword:
      term.kind = t.text == "a" ? Term::Kind::kUri : Term::Kind::kOpaque;
      break;
    case TokenKind::kOther:
      // Prefixed names and IRIs outside Wikidata.
      term.kind = (t.text.find(':') != std::string::npos &&
                   t.text.rfind("_:", 0) != 0)
                      ? Term::Kind::kUri
                      : Term::Kind::kOpaque;
      break;
    default:
      term.kind = Term::Kind::kOpaque;
  }
  return term;
}

class GroupParser {
 public:
  GroupParser(std::string_view raw, const std::vector<SparqlToken> &body)
      : raw_(raw), body_(body) {}

  std::vector<TriplePattern> Run(bool *partial) {
    size_t i = 0;
    while (i < body_.size()) {
      const auto &t = body_[i];
      if (IsPunct(t, ".")) {
        ++i;
        continue;
      }
      if (IsBlockKeyword(t) || IsPunct(t, "{")) {
        size_t end = BlockEnd(i);
        out_.push_back(TriplePattern::Block(Text(i, end)));
        *partial = true;
        i = end;
        continue;
      }
      size_t end = i;
      while (end < body_.size()) {
        const auto &u = body_[end];
        if (IsPunct(u, ".") || IsBlockKeyword(u) || IsPunct(u, "{")) break;
        if (IsPunct(u, "(") || IsPunct(u, "[")) {
          end = std::min(MatchClose(body_, end) + 1, body_.size());
          continue;
        }
        ++end;
      }
      if (!Segment(i, end)) {
        out_.push_back(TriplePattern::Block(Text(i, end)));
        *partial = true;
      }
      i = end;
    }
    for (const auto &tp : out_) {
      for (const Term *term : {&tp.subject, &tp.predicate, &tp.object}) {
        if (term->kind == Term::Kind::kOpaque) *partial = true;
      }
    }
    return std::move(out_);
  }

 private:
  // End (exclusive) of a FILTER/OPTIONAL/... construct or a braced group
  // followed by any number of UNION alternatives.
  size_t BlockEnd(size_t i) {
    size_t j = i;
    if (!IsPunct(body_[j], "{")) {
      ++j;
      while (j < body_.size() && !IsPunct(body_[j], "(") &&
             !IsPunct(body_[j], "{")) {
        ++j;
      }
      if (j >= body_.size()) return body_.size();
    }
    size_t end = std::min(MatchClose(body_, j) + 1, body_.size());
    while (end + 1 < body_.size() && IsKeyword(body_[end], "union") &&
           IsPunct(body_[end + 1], "{")) {
      end = std::min(MatchClose(body_, end + 1) + 1, body_.size());
    }
    return end;
  }

  std::string Text(size_t begin, size_t end) const {
    if (begin >= end) return "";
    size_t from = body_[begin].position;
    size_t to = body_[end - 1].position + body_[end - 1].text.size();
    return std::string(raw_.substr(from, to - from));
  }

  Term OpaqueTerm(size_t begin, size_t end) const {
    Term term;
    term.kind = Term::Kind::kOpaque;
    term.text = Text(begin, end);
    return term;
  }

  static bool SimpleTerm(const SparqlToken &t) {
    return t.kind == TokenKind::kVariable || t.kind == TokenKind::kUri ||
           t.kind == TokenKind::kLiteral || t.kind == TokenKind::kOther ||
           (t.kind == TokenKind::kKeyword && t.text == "a");
  }

  // Parses `s p o (, o)* (; p o (, o)*)*`. Returns false if the segment is
  // not of that shape.
  bool Segment(size_t begin, size_t end) {
    if (end - begin < 3 || !SimpleTerm(body_[begin])) return false;
    Term subject = MakeTerm(body_[begin]);
    std::vector<TriplePattern> triples;
    size_t i = begin + 1;
    while (i < end) {
      size_t group_end = i;
      while (group_end < end && !IsPunct(body_[group_end], ";")) ++group_end;
      // Split objects on ','.
      std::vector<size_t> commas;
      for (size_t j = i; j < group_end; ++j) {
        if (IsPunct(body_[j], ",")) commas.push_back(j);
      }
      size_t first_end = commas.empty() ? group_end : commas.front();
      if (first_end - i < 2) return false;
      size_t object_pos = first_end - 1;
      Term predicate = object_pos - i == 1 ? MakeTerm(body_[i])
                                           : OpaqueTerm(i, object_pos);
      if (object_pos - i == 1 && !SimpleTerm(body_[i])) {
        predicate = OpaqueTerm(i, object_pos);
      }
      std::vector<size_t> objects = {object_pos};
      for (size_t c = 0; c < commas.size(); ++c) {
        size_t next = c + 1 < commas.size() ? commas[c + 1] : group_end;
        if (next - commas[c] != 2) return false;
        objects.push_back(commas[c] + 1);
      }
      for (size_t o : objects) {
        if (!SimpleTerm(body_[o])) return false;
        triples.push_back({subject, predicate, MakeTerm(body_[o])});
      }
      i = group_end + 1;
      // Trailing ';' is legal.
      if (group_end + 1 == end) break;
    }
    out_.insert(out_.end(), triples.begin(), triples.end());
    return true;
  }

  std::string_view raw_;
  const std::vector<SparqlToken> &body_;
  std::vector<TriplePattern> out_;
};

// ---------------------------------------------------------------------------
// Canonicalization.

// One canonical token: either fixed text or a variable reference.
struct Piece {
  std::string text;  // canonical text, or the source variable name
  bool variable = false;
};

using PieceList = std::vector<Piece>;

std::string VarKey(std::string_view text) {
  // ?x and $x name the same variable.
  return std::string(text.substr(1));
}

std::string CanonicalLiteral(const std::string &text) {
  // Literal contents are exact; lowercase a lang tag or datatype suffix.
  if (text.empty() || (text[0] != '"' && text[0] != '\'')) return text;
  size_t close = text.find_last_of(text[0]);
  if (close == std::string::npos || close == 0) return text;
  return text.substr(0, close + 1) + AsciiLower(text.substr(close + 1));
}

PieceList ToPieces(const std::vector<SparqlToken> &toks) {
  PieceList out;
  for (const auto &t : toks) {
    switch (t.kind) {
      case TokenKind::kSpace:
        break;
      case TokenKind::kVariable:
        out.push_back({VarKey(t.text), true});
        break;
      case TokenKind::kUri:
        out.push_back({ParseUriToken(t.text)->text(), false});
        break;
      case TokenKind::kLiteral:
        out.push_back({CanonicalLiteral(t.text), false});
        break;
      case TokenKind::kPunct:
        out.push_back({t.text, false});
        break;
      default:
        out.push_back({AsciiLower(t.text), false});
    }
  }
  return out;
}

PieceList TermPieces(const Term &term) {
  if (term.text.empty()) return {};
  return ToPieces(Tokenize(term.text));
}

struct Element {
  bool triple = false;
  PieceList subject, predicate, object;  // for triples
  PieceList block;                       // for blocks
};

using NameMap = std::map<std::string, int>;

class ElementRenderer {
 public:
  ElementRenderer(const NameMap &names, bool permute)
      : names_(names), permute_(permute) {}

  // Renders with named variables as ?varN and unnamed ones as ?_K (K by
  // local first appearance). `order` receives the unnamed variables in
  // render order.
  std::string Render(const Element &e, std::vector<std::string> *order) {
    local_.clear();
    order_ = order;
    if (!e.triple) return Join({&e.block});
    const PieceList *s = &e.subject;
    const PieceList *o = &e.object;
    if (permute_) {
      ElementRenderer probe(names_, false);
      std::string rs = probe.Join({s});
      std::string ro = probe.Join({o});
      if (ro < rs) std::swap(s, o);
    }
    return Join({s, &e.predicate, o});
  }

 private:
  std::string Join(std::initializer_list<const PieceList *> lists) {
    std::string out;
    for (const PieceList *list : lists) {
      for (const Piece &p : *list) {
        if (!out.empty()) out.push_back(' ');
        if (!p.variable) {
          out += p.text;
          continue;
        }
        auto it = names_.find(p.text);
        if (it != names_.end()) {
          out += "?var" + std::to_string(it->second);
          continue;
        }
        auto [lit, inserted] = local_.emplace(p.text, static_cast<int>(local_.size()));
        if (inserted && order_) order_->push_back(p.text);
        out += "?_" + std::to_string(lit->second);
      }
    }
    return out;
  }

  const NameMap &names_;
  bool permute_;
  std::map<std::string, int> local_;
  std::vector<std::string> *order_ = nullptr;
};

// Chooses variable names for the WHERE elements by a traversal that always
// takes the smallest rendered element next, branching on ties. The best
// (lexicographically smallest) outcome over the branches is canonical.
class Labeler {
 public:
  Labeler(const std::vector<Element> &elements, const PieceList &tail,
          bool permute)
      : elements_(elements), tail_(tail), permute_(permute) {}

  NameMap Run(NameMap names) {
    std::vector<bool> used(elements_.size(), false);
    std::vector<std::string> seq;
    Search(names, used, seq);
    return best_names_;
  }

 private:
  static constexpr long kNodeBudget = 200000;

  void Search(NameMap &names, std::vector<bool> &used,
              std::vector<std::string> &seq) {
    ++nodes_;
    std::string min_text;
    std::vector<size_t> candidates;
    for (size_t i = 0; i < elements_.size(); ++i) {
      if (used[i]) continue;
      ElementRenderer r(names, permute_);
      std::string text = r.Render(elements_[i], nullptr);
      if (candidates.empty() || text < min_text) {
        min_text = text;
        candidates = {i};
      } else if (text == min_text) {
        candidates.push_back(i);
      }
    }
    if (candidates.empty()) {
      Finish(names, seq);
      return;
    }
    // Candidates without unnamed variables are interchangeable.
    if (min_text.find("?_") == std::string::npos) candidates.resize(1);
    for (size_t c : candidates) {
      if (c != candidates.front() && nodes_ > kNodeBudget) break;
      NameMap next = names;
      std::vector<std::string> order;
      ElementRenderer r(next, permute_);
      r.Render(elements_[c], &order);
      for (const auto &v : order) {
        int id = static_cast<int>(next.size());
        next.emplace(v, id);
      }
      ElementRenderer full(next, permute_);
      seq.push_back(full.Render(elements_[c], nullptr));
      used[c] = true;
      Search(next, used, seq);
      used[c] = false;
      seq.pop_back();
    }
  }

  void Finish(const NameMap &names, const std::vector<std::string> &seq) {
    NameMap final_names = names;
    for (const Piece &p : tail_) {
      if (p.variable && !final_names.count(p.text)) {
        int id = static_cast<int>(final_names.size());
        final_names.emplace(p.text, id);
      }
    }
    ElementRenderer r(final_names, false);
    Element tail_el;
    tail_el.block = tail_;
    std::string tail = r.Render(tail_el, nullptr);
    if (!have_best_ || std::tie(seq, tail) < std::tie(best_seq_, best_tail_)) {
      have_best_ = true;
      best_seq_ = seq;
      best_tail_ = tail;
      best_names_ = final_names;
    }
  }

  const std::vector<Element> &elements_;
  const PieceList &tail_;
  bool permute_;
  long nodes_ = 0;
  bool have_best_ = false;
  std::vector<std::string> best_seq_;
  std::string best_tail_;
  NameMap best_names_;
};

}  // namespace

std::vector<SparqlToken> Tokenize(std::string_view query) {
  return Lexer(query).Run();
}

std::string Detokenize(const std::vector<SparqlToken> &tokens) {
  std::string out;
  for (const auto &t : tokens) out += t.text;
  return out;
}

TriplePattern TriplePattern::Block(std::string text) {
  TriplePattern tp;
  tp.subject.kind = Term::Kind::kOpaque;
  tp.subject.text = std::move(text);
  tp.predicate.kind = Term::Kind::kOpaque;
  tp.object.kind = Term::Kind::kOpaque;
  return tp;
}

bool TriplePattern::is_block() const {
  return subject.kind == Term::Kind::kOpaque && predicate.text.empty() &&
         object.text.empty() && predicate.kind == Term::Kind::kOpaque &&
         object.kind == Term::Kind::kOpaque;
}

ParsedQuery Parse(std::string_view query) {
  ParsedQuery parsed;
  parsed.raw = std::string(query);
  auto toks = Significant(Tokenize(query));

  size_t open = toks.size();
  for (size_t j = 0; j < toks.size(); ++j) {
    if (IsPunct(toks[j], "}")) {
      throw SyntaxError("unbalanced '}'", toks[j].position);
    }
    if (IsPunct(toks[j], "{")) {
      open = j;
      break;
    }
  }
  if (open == toks.size()) {
    parsed.head_text = JoinTokens(toks, 0, toks.size());
    parsed.parse_quality = toks.empty() ? ParseQuality::kFull
                                        : ParseQuality::kPartial;
    return parsed;
  }
  int depth = 0;
  size_t close = toks.size();
  for (size_t j = open; j < toks.size(); ++j) {
    if (IsPunct(toks[j], "{")) ++depth;
    if (IsPunct(toks[j], "}") && --depth == 0) {
      close = j;
      break;
    }
  }
  if (close == toks.size()) {
    throw SyntaxError("unbalanced '{'", toks[open].position);
  }
  // Braces after the top-level group (e.g. a trailing VALUES block) must
  // balance among themselves.
  std::vector<size_t> pending;
  for (size_t j = close + 1; j < toks.size(); ++j) {
    if (IsPunct(toks[j], "{")) pending.push_back(j);
    if (IsPunct(toks[j], "}")) {
      if (pending.empty()) throw SyntaxError("unbalanced '}'", toks[j].position);
      pending.pop_back();
    }
  }
  if (!pending.empty()) {
    throw SyntaxError("unbalanced '{'", toks[pending.front()].position);
  }
  parsed.has_group = true;
  parsed.head_text = JoinTokens(toks, 0, open);
  parsed.tail_text = JoinTokens(toks, close + 1, toks.size());

  std::vector<SparqlToken> body(toks.begin() + static_cast<long>(open) + 1,
                                toks.begin() + static_cast<long>(close));
  bool partial = false;
  parsed.triples = GroupParser(query, body).Run(&partial);
  parsed.parse_quality = partial ? ParseQuality::kPartial : ParseQuality::kFull;
  return parsed;
}

UriSets ExtractUris(std::string_view query) {
  UriSets sets;
  for (const auto &t : Tokenize(query)) {
    if (t.kind != TokenKind::kUri) continue;
    auto occ = ParseUriToken(t.text);
    if (!occ) continue;
    (occ->ref.is_entity() ? sets.entities : sets.relations).insert(occ->ref);
  }
  return sets;
}

CanonicalQuery Canonicalize(const ParsedQuery &parsed,
                            const CanonicalizeOptions &options) {
  PieceList head = ToPieces(Tokenize(parsed.head_text));
  PieceList tail = ToPieces(Tokenize(parsed.tail_text));

  std::vector<Element> elements;
  for (const auto &tp : parsed.triples) {
    Element e;
    if (tp.is_block()) {
      e.block = TermPieces(tp.subject);
    } else {
      e.triple = true;
      e.subject = TermPieces(tp.subject);
      e.predicate = TermPieces(tp.predicate);
      e.object = TermPieces(tp.object);
    }
    elements.push_back(std::move(e));
  }

  NameMap names;
  for (const Piece &p : head) {
    if (p.variable && !names.count(p.text)) {
      int id = static_cast<int>(names.size());
      names.emplace(p.text, id);
    }
  }
  names = Labeler(elements, tail, options.within_triple_permutation).Run(names);

  CanonicalQuery out;
  out.has_group = parsed.has_group;
  ElementRenderer r(names, options.within_triple_permutation);
  Element head_el;
  head_el.block = head;
  out.head = r.Render(head_el, nullptr);
  Element tail_el;
  tail_el.block = tail;
  out.tail = r.Render(tail_el, nullptr);
  for (const auto &e : elements) out.triples.push_back(r.Render(e, nullptr));
  out.triple_multiset = out.triples;
  std::sort(out.triple_multiset.begin(), out.triple_multiset.end());
  return out;
}

std::string RenderCanonical(const CanonicalQuery &canonical) {
  std::string out = canonical.head;
  if (canonical.has_group) {
    if (!out.empty()) out += " ";
    out += "{";
    for (size_t i = 0; i < canonical.triples.size(); ++i) {
      out += i == 0 ? " " : " . ";
      out += canonical.triples[i];
    }
    out += " }";
  }
  if (!canonical.tail.empty()) {
    if (!out.empty()) out += " ";
    out += canonical.tail;
  }
  return out;
}

}  // namespace pgmr
