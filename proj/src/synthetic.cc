#include "pgmr/synthetic.h"

#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "pgmr/error.h"

namespace pgmr {
namespace {

constexpr const char *kWords[] = {
    "amber",   "anchor",  "apple",   "arrow",   "ash",     "aspen",
    "atlas",   "autumn",  "badge",   "bamboo",  "barley",  "basin",
    "beacon",  "birch",   "bishop",  "blade",   "bloom",   "bolt",
    "border",  "branch",  "brass",   "breeze",  "bridge",  "bronze",
    "brook",   "cabin",   "cactus",  "canal",   "candle",  "canyon",
    "carbon",  "castle",  "cedar",   "chalk",   "chapel",  "cherry",
    "cinder",  "circle",  "citadel", "clay",    "cliff",   "cloud",
    "clover",  "cobalt",  "comet",   "copper",  "coral",   "cotton",
    "crane",   "creek",   "crest",   "crown",   "crystal", "cypress",
    "dawn",    "delta",   "desert",  "dune",    "eagle",   "ember",
    "falcon",  "fern",    "field",   "flint",   "forest",  "fountain",
    "fox",     "frost",   "garden",  "garnet",  "glacier", "granite",
    "grove",   "harbor",  "harvest", "hawk",    "hazel",   "heath",
    "hollow",  "horizon", "island",  "ivory",   "jade",    "jasper",
    "juniper", "kestrel", "lagoon",  "lantern", "larch",   "laurel",
    "meadow",  "marble",  "maple",   "marsh",   "mesa",    "mill",
    "mist",    "moon",    "moss",    "mountain", "nectar", "north",
    "oak",     "oasis",   "ocean",   "olive",   "onyx",    "orchard",
    "otter",   "owl",     "palm",    "pearl",   "pebble",  "pepper",
    "pine",    "plain",   "plume",   "pond",    "poplar",  "prairie",
    "quarry",  "quartz",  "rain",    "raven",   "reed",    "ridge",
    "river",   "robin",   "rose",    "ruby",    "saffron", "sage",
    "salt",    "sand",    "sapphire", "shadow", "shore",   "silver",
    "slate",   "snow",    "sparrow", "spring",  "spruce",  "star",
    "stone",   "storm",   "summit",  "swan",    "thistle", "thorn",
    "thunder", "tide",    "timber",  "topaz",   "tower",   "trail",
    "tulip",   "tundra",  "valley",  "velvet",  "violet",  "walnut",
    "willow",  "winter",  "wolf",    "wren",    "yarrow",  "zephyr",
};
constexpr std::size_t kWordCount = sizeof(kWords) / sizeof(kWords[0]);

constexpr const char *kDescriptionWords[] = {
    "ancient", "city",      "river",     "region",   "village",   "person",
    "painter", "composer",  "writer",    "chemist",  "company",   "band",
    "album",   "film",      "novel",     "species",  "mountain",  "lake",
    "island",  "province",  "university", "museum",  "ship",      "bridge",
    "planet",  "element",   "language",  "festival", "railway",   "castle",
    "northern", "southern", "eastern",   "western",  "coastal",   "medieval",
    "modern",  "small",     "large",     "former",   "famous",    "obscure",
    "located", "founded",   "known",     "built",    "named",     "near",
    "in",      "of",        "the",       "with",     "for",       "by",
};
constexpr std::size_t kDescriptionWordCount =
    sizeof(kDescriptionWords) / sizeof(kDescriptionWords[0]);

// Uniform in [0, n) by rejection; stable across standard libraries.
std::uint64_t Pick(std::mt19937_64 &rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

double Unit(std::mt19937_64 &rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

std::string Capitalize(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 32);
  return w;
}

std::string RandomLabel(std::mt19937_64 &rng, std::size_t min_words,
                        std::size_t max_words, bool title) {
  std::size_t n = min_words + Pick(rng, max_words - min_words + 1);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    std::string w = kWords[Pick(rng, kWordCount)];
    out += title ? Capitalize(w) : w;
  }
  return out;
}

std::string RandomDescription(std::mt19937_64 &rng) {
  std::size_t n = 4 + Pick(rng, 6);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += kDescriptionWords[Pick(rng, kDescriptionWordCount)];
  }
  out += ' ';
  out += kWords[Pick(rng, kWordCount)];
  return out;
}

// Skewed towards low indices so that some URIs are frequent and many rare.
std::size_t Skewed(std::mt19937_64 &rng, std::size_t n) {
  double u = Unit(rng);
  auto i = static_cast<std::size_t>(u * u * static_cast<double>(n));
  return std::min(i, n - 1);
}

}  // namespace

SyntheticKg GenerateKg(const SyntheticKgOptions &options) {
  if (options.entities < 2 || options.relations < 2) {
    throw Error("synthetic KG needs at least 2 entities and 2 relations");
  }
  std::mt19937_64 rng(options.seed);
  SyntheticKg kg;
  std::set<std::string> used;
  for (std::size_t i = 0; i < options.entities; ++i) {
    UriRef uri = UriRef::Entity(options.first_entity_id + i);
    std::string label;
    if (i > 0 && Unit(rng) < options.duplicate_label_fraction) {
      label = kg.entities[Pick(rng, i)].label;
    } else {
      do {
        label = RandomLabel(rng, 2, 3, true);
      } while (!used.insert(label).second);
    }
    kg.entities.push_back(KgRecord::Make(uri, label, RandomDescription(rng)));
  }
  used.clear();
  for (std::size_t i = 0; i < options.relations; ++i) {
    std::string label;
    do {
      label = RandomLabel(rng, 1, 3, false);
    } while (!used.insert(label).second);
    kg.relations.push_back(KgRecord::Make(
        UriRef::Relation(options.first_relation_id + i), label,
        "property linking an item to its " + RandomDescription(rng)));
  }
  return kg;
}

std::vector<SyntheticSample> GenerateCorpus(const SyntheticKg &kg,
                                            std::size_t count,
                                            std::uint64_t seed) {
  if (kg.entities.size() < 2 || kg.relations.size() < 2) {
    throw Error("synthetic corpus needs at least 2 entities and 2 relations");
  }
  std::mt19937_64 rng(seed);
  std::vector<SyntheticSample> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const KgRecord &e1 = kg.entities[Skewed(rng, kg.entities.size())];
    const KgRecord *e2 = &kg.entities[Skewed(rng, kg.entities.size())];
    while (e2->uri == e1.uri) e2 = &kg.entities[Pick(rng, kg.entities.size())];
    const KgRecord &r1 = kg.relations[Pick(rng, kg.relations.size())];
    const KgRecord *r2 = &kg.relations[Pick(rng, kg.relations.size())];
    while (r2->uri == r1.uri) r2 = &kg.relations[Pick(rng, kg.relations.size())];

    bool upper = Pick(rng, 3) == 0;
    auto kw = [&](const char *k) {
      std::string s = k;
      if (upper) {
        for (char &c : s) {
          if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 32);
        }
      }
      return s;
    };
    auto ent = [&](const KgRecord &r) {
      return (upper ? "wd:Q" : "wd:q") + std::to_string(r.uri.id());
    };
    auto rel = [&](const char *prefix, const KgRecord &r) {
      return std::string(prefix) + (upper ? ":P" : ":p") + std::to_string(r.uri.id());
    };

    SyntheticSample s;
    s.id = "s" + std::to_string(n + 1);
    switch (Pick(rng, 9)) {
      case 0:
        s.question = "Which things have " + r1.label + " " + e1.label + "?";
        s.gold_sparql = kw("select distinct") + " ?x " + kw("where") + " { ?x " +
                        rel("wdt", r1) + " " + ent(e1) + " }";
        break;
      case 1:
        s.question = "What is the " + r1.label + " of " + e1.label + "?";
        s.gold_sparql = kw("select") + " ?answer " + kw("where") + " { " + ent(e1) +
                        " " + rel("wdt", r1) + " ?answer }";
        break;
      case 2:
        s.question = "Is " + e2->label + " the " + r1.label + " of " + e1.label + "?";
        s.gold_sparql = kw("ask") + " " + kw("where") + " { " + ent(e1) + " " +
                        rel("wdt", r1) + " " + ent(*e2) + " }";
        break;
      case 3:
        s.question = "Which things have " + r1.label + " " + e1.label + " and " +
                     r2->label + " " + e2->label + "?";
        s.gold_sparql = kw("select distinct") + " ?sbj " + kw("where") + " { ?sbj " +
                        rel("wdt", r1) + " " + ent(e1) + " . ?sbj " +
                        rel("wdt", *r2) + " " + ent(*e2) + " }";
        break;
      case 4:
        s.question = "What is the " + r2->label + " of the " + r1.label + " of " +
                     e1.label + "?";
        s.gold_sparql = kw("select") + " ?value " + kw("where") + " { " + ent(e1) +
                        " " + rel("wdt", r1) + " ?x . ?x " + rel("wdt", *r2) +
                        " ?value }";
        break;
      case 5:
        s.question = "How many things have " + r1.label + " " + e1.label + "?";
        s.gold_sparql = kw("select") + " (" + kw("count") + "(?x) " + kw("as") +
                        " ?total) " + kw("where") + " { ?x " + rel("wdt", r1) +
                        " " + ent(e1) + " }";
        break;
      case 6:
        s.question = "What is the " + r1.label + " of " + e1.label + " and its " +
                     r2->label + "?";
        s.gold_sparql = kw("select") + " ?obj ?q " + kw("where") + " { " + ent(e1) +
                        " " + rel("p", r1) + " ?s . ?s " + rel("ps", r1) +
                        " ?obj . ?s " + rel("pq", *r2) + " ?q }";
        break;
      case 7:
        s.question = "Which things with " + r1.label + " " + e1.label +
                     " are not " + e2->label + "?";
        s.gold_sparql = kw("select distinct") + " ?x " + kw("where") + " { ?x " +
                        rel("wdt", r1) + " " + ent(e1) + " . " + kw("filter") +
                        "(?x != " + ent(*e2) + ") }";
        break;
      default:
        s.question = "List five things with " + r1.label + " " + e1.label + ".";
        s.gold_sparql = kw("select distinct") + " ?item " + kw("where") +
                        " { ?item " + rel("wdt", r1) + " " + ent(e1) + " } " +
                        kw("order by") + " ?item " + kw("limit") + " 5";
        break;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<KgRecord> GenerateDistractors(UriKind kind, std::size_t count,
                                          std::uint64_t first_id,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5deece66dULL);
  std::vector<KgRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    bool entity = kind == UriKind::kEntity;
    out.push_back(KgRecord::Make(UriRef(kind, first_id + i),
                                 RandomLabel(rng, entity ? 2 : 1, 3, entity),
                                 RandomDescription(rng)));
  }
  return out;
}

std::string PerturbLabel(const std::string &label, std::mt19937_64 &rng) {
  // Candidate positions: interior characters of words with >= 4 letters.
  std::vector<std::size_t> positions;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= label.size(); ++i) {
    if (i == label.size() || label[i] == ' ') {
      if (i - start >= 4) {
        for (std::size_t p = start + 1; p + 1 < i; ++p) positions.push_back(p);
      }
      start = i + 1;
    }
  }
  if (positions.empty()) return label;
  std::size_t p = positions[Pick(rng, positions.size())];
  std::string out = label;
  if (Pick(rng, 2) == 0 && out[p] != out[p + 1]) {
    std::swap(out[p], out[p + 1]);
  } else {
    out.erase(p, 1);
  }
  return out;
}

std::string MetadataJsonl(const std::vector<KgRecord> &records) {
  std::string out;
  for (const auto &r : records) {
    nlohmann::json j = {{"uri", (r.uri.is_entity() ? "Q" : "P") + std::to_string(r.uri.id())},
                        {"label", r.label},
                        {"description", r.description}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace pgmr
