#ifndef PGMR_TESTS_RANDOM_QUERIES_H_
#define PGMR_TESTS_RANDOM_QUERIES_H_

// Random queries in the restricted dialect, kept as structured triples so
// tests can permute and rename them independently of the library parser.

#include <algorithm>
#include <cctype>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace pgmr::testing {

struct RandomTriple {
  std::string s, p, o;
};

struct RandomQuery {
  std::string head;  // uses variables from the triples
  std::vector<RandomTriple> triples;
  std::string tail;

  std::string Text() const {
    std::string out = head + " { ";
    for (std::size_t i = 0; i < triples.size(); ++i) {
      if (i) out += " . ";
      out += triples[i].s + " " + triples[i].p + " " + triples[i].o;
    }
    return out + " }" + (tail.empty() ? "" : " " + tail);
  }

  std::vector<std::string> Variables() const {
    std::vector<std::string> vars;
    auto note = [&](const std::string &t) {
      if (t[0] == '?' && std::find(vars.begin(), vars.end(), t) == vars.end()) {
        vars.push_back(t);
      }
    };
    for (const auto &t : triples) {
      note(t.s);
      note(t.p);
      note(t.o);
    }
    return vars;
  }

  // Applies a variable renaming everywhere.
  RandomQuery Renamed(const std::map<std::string, std::string> &names) const {
    RandomQuery q = *this;
    auto sub = [&](std::string &t) {
      auto it = names.find(t);
      if (it != names.end()) t = it->second;
    };
    for (auto &t : q.triples) {
      sub(t.s);
      sub(t.p);
      sub(t.o);
    }
    q.head = RenameInText(head, names);
    q.tail = RenameInText(tail, names);
    return q;
  }

 private:
  static std::string RenameInText(const std::string &text,
                                  const std::map<std::string, std::string> &names) {
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
      if (text[i] == '?') {
        std::size_t j = i + 1;
        while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) ||
                                   text[j] == '_')) {
          ++j;
        }
        std::string var = text.substr(i, j - i);
        auto it = names.find(var);
        out += it != names.end() ? it->second : var;
        i = j;
      } else {
        out += text[i++];
      }
    }
    return out;
  }
};

// Small vocabularies so that random pairs collide often enough to exercise
// both outcomes of an equivalence check.
class QueryGenerator {
 public:
  explicit QueryGenerator(std::uint64_t seed) : rng_(seed) {}

  RandomQuery Next(int max_triples = 5) {
    RandomQuery q;
    int n = Uniform(1, max_triples);
    int var_pool = Uniform(1, 4);
    for (int i = 0; i < n; ++i) {
      RandomTriple t;
      t.s = Chance(0.6) ? Var(var_pool) : Entity();
      t.p = Chance(0.1) ? Var(var_pool) : Relation();
      t.o = Chance(0.5) ? Var(var_pool) : (Chance(0.8) ? Entity() : Literal());
      q.triples.push_back(t);
    }
    auto vars = q.Variables();
    if (vars.empty() || Chance(0.2)) {
      q.head = "ask where";
    } else {
      std::string v = vars[Uniform(0, static_cast<int>(vars.size()) - 1)];
      switch (Uniform(0, 2)) {
        case 0: q.head = "select distinct " + v + " where"; break;
        case 1: q.head = "select " + v + " where"; break;
        default: q.head = "select (count(" + v + ") as ?n) where"; break;
      }
      if (Chance(0.2)) q.tail = "order by " + v + " limit 5";
    }
    return q;
  }

  // Same query with triples shuffled and variables renamed bijectively.
  RandomQuery Scramble(const RandomQuery &q) {
    RandomQuery out = q;
    std::shuffle(out.triples.begin(), out.triples.end(), rng_);
    std::map<std::string, std::string> names;
    auto vars = q.Variables();
    std::vector<std::string> fresh;
    for (std::size_t i = 0; i < vars.size(); ++i) fresh.push_back("?z" + std::to_string(i));
    std::shuffle(fresh.begin(), fresh.end(), rng_);
    for (std::size_t i = 0; i < vars.size(); ++i) names[vars[i]] = fresh[i];
    return out.Renamed(names);
  }

  // One small change that usually alters the meaning.
  RandomQuery Mutate(const RandomQuery &q) {
    RandomQuery out = q;
    auto &t = out.triples[Uniform(0, static_cast<int>(out.triples.size()) - 1)];
    switch (Uniform(0, 2)) {
      case 0: t.o = Chance(0.5) ? Entity() : Var(4); break;
      case 1: t.p = Relation(); break;
      default: std::swap(t.s, t.o); break;
    }
    return out;
  }

  std::mt19937_64 &rng() { return rng_; }

  int Uniform(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng_);
  }
  bool Chance(double p) { return std::bernoulli_distribution(p)(rng_); }

 private:
  std::string Var(int pool) { return "?v" + std::to_string(Uniform(0, pool - 1)); }
  std::string Entity() { return "wd:q" + std::to_string(Uniform(1, 6)); }
  std::string Relation() { return "wdt:p" + std::to_string(Uniform(1, 4)); }
  std::string Literal() { return Chance(0.5) ? "\"x\"@en" : "5"; }

  std::mt19937_64 rng_;
};

}  // namespace pgmr::testing

#endif  // PGMR_TESTS_RANDOM_QUERIES_H_
