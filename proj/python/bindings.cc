// Python bindings for the core library: memories, retrieval, grounding,
// the intermediate-query format and the query metrics.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pgmr/embedding.h"
#include "pgmr/error.h"
#include "pgmr/harness.h"
#include "pgmr/kg_store.h"
#include "pgmr/metrics.h"
#include "pgmr/retrieval.h"
#include "pgmr/sparql.h"
#include "pgmr/synthetic.h"
#include "pgmr/transform.h"

namespace py = pybind11;
using namespace pgmr;

namespace {

UriKind KindFromName(const std::string &name) {
  if (name == "entity") return UriKind::kEntity;
  if (name == "relation") return UriKind::kRelation;
  throw py::value_error("kind must be 'entity' or 'relation'");
}

py::dict UriSetsDict(const UriSets &u) {
  py::dict d;
  d["entities"] = std::vector<UriRef>(u.entities.begin(), u.entities.end());
  d["relations"] = std::vector<UriRef>(u.relations.begin(), u.relations.end());
  return d;
}

}  // namespace

PYBIND11_MODULE(_pgmr, m) {
  m.doc() = "Grounded SPARQL generation: KG memories, retrieval and metrics";

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<FormatError>(m, "FormatError", error.ptr());
  py::register_exception<SyntaxError>(m, "QuerySyntaxError", error.ptr());
  py::register_exception<MalformedOutput>(m, "MalformedOutput", error.ptr());
  py::register_exception<UnknownUri>(m, "UnknownUri", error.ptr());
  py::register_exception<MissingFixture>(m, "MissingFixture", error.ptr());
  py::register_exception<TransportError>(m, "TransportError", error.ptr());
  py::register_exception<InfeasibleSplit>(m, "InfeasibleSplit", error.ptr());

  py::enum_<UriKind>(m, "UriKind")
      .value("ENTITY", UriKind::kEntity)
      .value("RELATION", UriKind::kRelation);

  py::class_<UriRef>(m, "UriRef")
      .def_static("parse", &UriRef::Parse, py::arg("text"))
      .def_static("entity", &UriRef::Entity)
      .def_static("relation", &UriRef::Relation)
      .def_property_readonly("kind", &UriRef::kind)
      .def_property_readonly("id", &UriRef::id)
      .def_property_readonly("text", &UriRef::canonical_text)
      .def("__eq__", [](const UriRef &a, const UriRef &b) { return a == b; })
      .def("__hash__", [](const UriRef &u) { return std::hash<UriRef>()(u); })
      .def("__repr__", [](const UriRef &u) { return "UriRef('" + u.canonical_text() + "')"; });

  py::class_<KgRecord>(m, "KgRecord")
      .def(py::init([](const UriRef &uri, std::string label, std::string description) {
             return KgRecord::Make(uri, std::move(label), std::move(description));
           }),
           py::arg("uri"), py::arg("label"), py::arg("description") = "")
      .def_readonly("uri", &KgRecord::uri)
      .def_readonly("label", &KgRecord::label)
      .def_readonly("description", &KgRecord::description)
      .def_readonly("embedding", &KgRecord::embedding);

  py::class_<EmbeddingProvider>(m, "EmbeddingProvider")
      .def_property_readonly("dimension", &EmbeddingProvider::dimension)
      .def("embed", [](const EmbeddingProvider &e, const std::string &text) { return e.Embed(text); });
  py::class_<HashedTrigramEmbedder, EmbeddingProvider>(m, "HashedTrigramEmbedder")
      .def(py::init<int, std::uint64_t>(), py::arg("dimension") = 256, py::arg("seed") = 0);

  py::class_<Memory>(m, "Memory")
      .def_static(
          "from_records",
          [](const std::string &kind, std::vector<KgRecord> records) {
            return Memory::FromRecords(KindFromName(kind), std::move(records));
          },
          py::arg("kind"), py::arg("records"))
      .def_static(
          "from_metadata",
          [](const std::string &text, const std::string &kind) {
            return ParseMetadata(text, KindFromName(kind));
          },
          py::arg("text"), py::arg("kind"))
      .def_static(
          "load",
          [](const std::string &path, const std::string &kind, const EmbeddingProvider &e) {
            return LoadMemoryFile(path, KindFromName(kind), e);
          },
          py::arg("path"), py::arg("kind"), py::arg("embedder"))
      .def_static("load_snapshot", &LoadSnapshot)
      .def("save_snapshot", [](const Memory &mem, const std::string &path) { SaveSnapshot(mem, path); })
      .def("embedded", [](const Memory &mem, const EmbeddingProvider &e) { return EmbedMemory(mem, e); },
           py::arg("embedder"), "Copy with every record embedded.")
      .def("ablate",
           [](const Memory &mem, double fraction, std::uint64_t seed) {
             Ablation a = Ablate(mem, fraction, seed);
             return py::make_tuple(a.memory, a.removed);
           },
           py::arg("fraction"), py::arg("seed"))
      .def("__len__", &Memory::size)
      .def("__contains__", &Memory::Contains)
      .def_property_readonly("kind", &Memory::kind)
      .def_property_readonly("dimension", &Memory::dimension)
      .def_property_readonly("records", &Memory::records)
      .def("lookup_label", [](const Memory &mem, const std::string &label) {
        std::vector<KgRecord> out;
        for (const KgRecord *r : mem.LookupLabel(label)) out.push_back(*r);
        return out;
      });

  py::class_<PlaceholderBinding>(m, "PlaceholderBinding")
      .def(py::init([](std::string name, std::string label, std::string description) {
             auto parsed = ParsePlaceholderName(name);
             if (!parsed) throw py::value_error("placeholder must be entityN or relationN");
             return PlaceholderBinding{std::move(name), parsed->first, std::move(label),
                                       std::move(description)};
           }),
           py::arg("name"), py::arg("label"), py::arg("description") = "")
      .def_readonly("name", &PlaceholderBinding::name)
      .def_readonly("kind", &PlaceholderBinding::kind)
      .def_readonly("label", &PlaceholderBinding::label)
      .def_readonly("description", &PlaceholderBinding::description)
      .def("__repr__", &PlaceholderBinding::Serialize);

  py::class_<IntermediateQuery>(m, "IntermediateQuery")
      .def(py::init<>())
      .def_readwrite("template", &IntermediateQuery::template_text)
      .def_readwrite("bindings", &IntermediateQuery::bindings)
      .def_readonly("defects", &IntermediateQuery::defects)
      .def("render", &RenderPgmr)
      .def("__eq__", [](const IntermediateQuery &a, const IntermediateQuery &b) { return a == b; });

  m.def("sparql_to_pgmr",
        [](const std::string &query, const Memory &entities, const Memory &relations) {
          PgmrConversion c = SparqlToPgmr(query, entities, relations);
          return py::make_tuple(c.query, c.uri_of);
        },
        py::arg("query"), py::arg("entities"), py::arg("relations"),
        "Intermediate query and the source URI of each placeholder.");
  m.def("parse_pgmr", &ParsePgmr, py::arg("text"));
  m.def("render_pgmr", &RenderPgmr, py::arg("query"));

  py::class_<RetrievalResult>(m, "RetrievalResult")
      .def_readonly("uri", &RetrievalResult::uri)
      .def_readonly("score", &RetrievalResult::score)
      .def_property_readonly("method", [](const RetrievalResult &r) {
        return std::string(RetrievalMethodName(r.method));
      })
      .def_property_readonly("candidates", [](const RetrievalResult &r) {
        std::vector<std::pair<UriRef, float>> out;
        for (const auto &c : r.candidates) out.emplace_back(c.uri, c.score);
        return out;
      });
  m.def("retrieve",
        [](const PlaceholderBinding &b, const Memory &mem, const EmbeddingProvider &e,
           double threshold) { return Retrieve(b, mem, e, threshold); },
        py::arg("binding"), py::arg("memory"), py::arg("embedder"),
        py::arg("threshold") = kDefaultThreshold);

  py::class_<GroundingOutcome>(m, "GroundingOutcome")
      .def_property_readonly("status", [](const GroundingOutcome &g) {
        return std::string(GroundingStatusName(g.status));
      })
      .def_readonly("sparql", &GroundingOutcome::sparql)
      .def_readonly("refused", &GroundingOutcome::refused)
      .def_readonly("detail", &GroundingOutcome::detail)
      .def_readonly("resolutions", &GroundingOutcome::resolutions);
  m.def("ground_query",
        [](const IntermediateQuery &q, const Memory &ents, const Memory &rels,
           const EmbeddingProvider &e, double threshold) {
          return GroundQuery(q, ents, rels, e, threshold);
        },
        py::arg("query"), py::arg("entities"), py::arg("relations"), py::arg("embedder"),
        py::arg("threshold") = kDefaultThreshold);

  m.def("canonicalize",
        [](const std::string &query, bool within_triple) {
          CanonicalizeOptions o;
          o.within_triple_permutation = within_triple;
          // Sorted triples, so equal queries render identically.
          CanonicalQuery c = Canonicalize(Parse(query), o);
          c.triples = c.triple_multiset;
          return RenderCanonical(c);
        },
        py::arg("query"), py::arg("within_triple_permutation") = false);
  m.def("extract_uris", [](const std::string &q) { return UriSetsDict(ExtractUris(q)); });
  m.def("sqm", [](const std::string &a, const std::string &b) { return Sqm(a, b); },
        py::arg("predicted"), py::arg("gold"));
  m.def("bleu", &Bleu, py::arg("predicted"), py::arg("gold"));
  m.def("bleu_tokens", &BleuTokens);
  m.def("uri_em",
        [](const std::string &a, const std::string &b, const std::string &kind) {
          return UriEm(a, b, KindFromName(kind));
        },
        py::arg("predicted"), py::arg("gold"), py::arg("kind"));
  m.def("hallucination", &Hallucination, py::arg("query"), py::arg("entities"),
        py::arg("relations"));

  m.def("generate_kg",
        [](std::size_t entities, std::size_t relations, std::uint64_t seed, double duplicates) {
          SyntheticKg kg = GenerateKg({.entities = entities,
                                       .relations = relations,
                                       .seed = seed,
                                       .duplicate_label_fraction = duplicates});
          return py::make_tuple(kg.entities, kg.relations);
        },
        py::arg("entities") = 500, py::arg("relations") = 40, py::arg("seed") = 1,
        py::arg("duplicate_labels") = 0.0);
  m.def("generate_corpus",
        [](const std::vector<KgRecord> &entities, const std::vector<KgRecord> &relations,
           std::size_t count, std::uint64_t seed) {
          std::vector<py::dict> out;
          for (const auto &s : GenerateCorpus({entities, relations}, count, seed)) {
            py::dict d;
            d["id"] = s.id;
            d["question"] = s.question;
            d["sparql"] = s.gold_sparql;
            out.push_back(d);
          }
          return out;
        },
        py::arg("entities"), py::arg("relations"), py::arg("count"), py::arg("seed") = 0);

  m.attr("DEFAULT_THRESHOLD") = kDefaultThreshold;
}
