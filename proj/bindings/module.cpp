#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <set>

#include "sectra/corpus.hpp"
#include "sectra/evaluator.hpp"
#include "sectra/model.hpp"
#include "sectra/sectioner.hpp"
#include "sectra/trainer.hpp"

namespace py = pybind11;

namespace {

sectra::RankedList list_from_order(const std::vector<std::string>& ranked_ids) {
  sectra::RankedList ranked;
  ranked.query_id = "query";
  double score = static_cast<double>(ranked_ids.size());
  for (const std::string& id : ranked_ids) {
    ranked.items.push_back({id, score});
    score -= 1.0;
  }
  return ranked;
}

py::dict sectioned_to_dict(const sectra::SectionedAbstract& sectioned) {
  py::dict out;
  out["background"] = sectioned.background;
  out["method"] = sectioned.method;
  out["results"] = sectioned.results;
  out["residual"] = sectioned.residual;
  return out;
}

}  // namespace

PYBIND11_MODULE(_sectra, m) {
  m.doc() = "Section-weighted paper representation and ranking primitives";

  m.def("split_sentences", &sectra::split_sentences, py::arg("abstract"),
        "Split an abstract into sentences (abbreviation-aware).");

  m.def(
      "classify_sentence",
      [](const std::string& sentence) {
        sectra::HeuristicClassifier classifier;
        const sectra::SentenceClassification result =
            sectra::classify_sentence(classifier, sentence);
        py::dict out;
        out["label"] = std::string(sectra::section_label_name(result.label()));
        out["probabilities"] = result.probabilities;
        return out;
      },
      py::arg("sentence"), "Cue-phrase classification over the five rhetorical categories.");

  m.def(
      "section_abstract",
      [](const std::string& abstract) {
        sectra::HeuristicClassifier classifier;
        std::vector<sectra::SentenceClassification> classified;
        for (const std::string& sentence : sectra::split_sentences(abstract)) {
          classified.push_back(sectra::classify_sentence(classifier, sentence));
        }
        return sectioned_to_dict(sectra::assemble(classified));
      },
      py::arg("abstract"), "Split, classify, and assemble an abstract into sections.");

  m.def("hashed_embed", &sectra::hashed_embed, py::arg("text"), py::arg("dimension") = 768,
        py::arg("seed") = 0, "Deterministic feature-hashing embedding, L2-normalized.");

  m.def("cosine", &sectra::cosine, py::arg("u"), py::arg("v"));
  m.def("l2_distance", &sectra::l2_distance, py::arg("u"), py::arg("v"));
  m.def("triplet_loss", &sectra::triplet_loss, py::arg("anchor"), py::arg("positive"),
        py::arg("negative"), py::arg("margin") = 1.0);

  m.def(
      "average_precision",
      [](const std::vector<std::string>& ranked_ids, const std::vector<std::string>& relevant) {
        return sectra::average_precision(list_from_order(ranked_ids),
                                         std::set<std::string>(relevant.begin(), relevant.end()));
      },
      py::arg("ranked_ids"), py::arg("relevant"));

  m.def(
      "reciprocal_rank",
      [](const std::vector<std::string>& ranked_ids, const std::vector<std::string>& relevant) {
        return sectra::reciprocal_rank(list_from_order(ranked_ids),
                                       std::set<std::string>(relevant.begin(), relevant.end()));
      },
      py::arg("ranked_ids"), py::arg("relevant"));

  m.def(
      "hard_negatives",
      [](const std::map<std::string, std::vector<std::string>>& citations,
         const std::string& query_id) {
        sectra::Corpus corpus;
        for (const auto& [id, refs] : citations) {
          sectra::PaperRecord record;
          record.id = id;
          record.references = refs;
          corpus.add(std::move(record));
        }
        const sectra::CitationGraph graph = sectra::CitationGraph::build(corpus);
        return sectra::hard_negatives(graph, query_id);
      },
      py::arg("citations"), py::arg("query_id"),
      "Cite-of-cite negatives for a query given an id -> references mapping.");

  m.def(
      "represent_paper",
      [](const std::string& title, const std::string& abstract, int dimension, int heads,
         int hidden, double alpha, std::uint64_t provider_seed, std::uint64_t init_seed) {
        sectra::PaperRecord paper;
        paper.id = "(ad-hoc)";
        paper.title = title;
        paper.abstract = abstract;
        sectra::HashedEmbedder provider(dimension, provider_seed);
        sectra::PaperSectioner sectioner(std::make_shared<sectra::HeuristicClassifier>());
        const sectra::ModelParams params =
            sectra::init_model(dimension, heads, hidden, alpha, init_seed);
        const sectra::PaperRepresentation repr =
            sectra::represent(paper, provider, sectioner, params);
        py::dict out;
        out["h_background"] = repr.h_background;
        out["h_method"] = repr.h_method;
        out["h_results"] = repr.h_results;
        out["h_sections"] = repr.h_sections;
        out["h_abstract"] = repr.h_abstract;
        out["h_paper"] = repr.h_paper;
        out["z_paper"] = repr.z_paper;
        out["section_weights"] = repr.section_weights;
        return out;
      },
      py::arg("title"), py::arg("abstract"), py::arg("dimension") = 64, py::arg("heads") = 4,
      py::arg("hidden") = 0, py::arg("alpha") = 0.3, py::arg("provider_seed") = 0,
      py::arg("init_seed") = 0,
      "Run the full representation pipeline for one paper with a hashed embedder.");
}
