#ifndef SECTRA_SPLIT_HPP_
#define SECTRA_SPLIT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sectra/corpus.hpp"

namespace sectra {

enum class NegativeKind { hard, random };

const char* negative_kind_name(NegativeKind kind);
NegativeKind negative_kind_from_name(const std::string& name);

struct Triplet {
  std::string query_id;
  std::string positive_id;
  std::string negative_id;
  NegativeKind negative_kind = NegativeKind::random;

  bool operator==(const Triplet&) const = default;
};

struct EvaluationCase {
  std::string query_id;
  std::vector<std::string> positives;
  std::vector<std::string> negatives;

  bool operator==(const EvaluationCase&) const = default;
};

struct SplitConfig {
  double train_fraction = 0.84;
  double validation_fraction = 0.08;
  double test_fraction = 0.08;
  int random_negatives_per_query = 11;  // train, in addition to the hard slot
  int eval_negatives = 100;             // validation/test candidates per query
  int eval_positives_cap = 0;           // 0 keeps every reference

  bool operator==(const SplitConfig&) const = default;
};

struct SplitReport {
  std::size_t hard_negative_substitutions = 0;  // queries with no cite-of-cite negative
  std::size_t dropped_eval_cases = 0;           // no positive left after train exclusion

  bool operator==(const SplitReport&) const = default;
};

struct DatasetSplit {
  std::vector<std::string> train_queries;
  std::vector<std::string> validation_queries;
  std::vector<std::string> test_queries;
  std::vector<Triplet> train;
  std::vector<EvaluationCase> validation;
  std::vector<EvaluationCase> test;
  std::uint64_t seed = 0;
  SplitConfig config;
  SplitReport report;

  bool operator==(const DatasetSplit&) const = default;
};

// Pure function of (corpus, config, seed). Each train query yields exactly
// (1 + random_negatives_per_query) triplets; a query with no hard negative
// gets an extra random negative in the hard slot, counted in the report.
// Validation/test candidates never overlap any id appearing in the train
// triples. Fatal when the corpus cannot supply the requested negatives.
DatasetSplit build_split(const Corpus& corpus, const CitationGraph& graph,
                         const SplitConfig& config, std::uint64_t seed);

// Split manifest: everything needed to re-run evaluation without re-sampling.
void save_split(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit load_split(const std::filesystem::path& path);

}  // namespace sectra

#endif  // SECTRA_SPLIT_HPP_
