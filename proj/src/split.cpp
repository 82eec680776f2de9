#include "sectra/split.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "sectra/errors.hpp"
#include "sectra/rng.hpp"

namespace sectra {

using ordered_json = nlohmann::ordered_json;

const char* negative_kind_name(NegativeKind kind) {
  return kind == NegativeKind::hard ? "hard" : "random";
}

NegativeKind negative_kind_from_name(const std::string& name) {
  if (name == "hard") return NegativeKind::hard;
  if (name == "random") return NegativeKind::random;
  throw DataError("unknown negative kind: " + name);
}

namespace {

void validate_config(const SplitConfig& config) {
  if (config.train_fraction <= 0.0 || config.validation_fraction < 0.0 ||
      config.test_fraction < 0.0) {
    throw UsageError("split fractions must be positive (train) and non-negative");
  }
  const double total =
      config.train_fraction + config.validation_fraction + config.test_fraction;
  if (total > 1.0 + 1e-9) throw UsageError("split fractions sum to more than 1");
  if (config.random_negatives_per_query < 0) {
    throw UsageError("random_negatives_per_query must be >= 0");
  }
  if (config.eval_negatives < 1) throw UsageError("eval_negatives must be >= 1");
  if (config.eval_positives_cap < 0) throw UsageError("eval_positives_cap must be >= 0");
}

// Candidate pool for negative sampling: every corpus id except the query, its
// references, and the explicitly excluded ids. Deterministic (sorted input).
std::vector<std::string> negative_pool(const std::vector<std::string>& sorted_ids,
                                       const std::string& query_id,
                                       const std::vector<std::string>& references,
                                       const std::unordered_set<std::string>& excluded) {
  std::vector<std::string> pool;
  pool.reserve(sorted_ids.size());
  for (const std::string& id : sorted_ids) {
    if (id == query_id) continue;
    if (std::binary_search(references.begin(), references.end(), id)) continue;
    if (excluded.count(id) != 0) continue;
    pool.push_back(id);
  }
  return pool;
}

}  // namespace

DatasetSplit build_split(const Corpus& corpus, const CitationGraph& graph,
                         const SplitConfig& config, std::uint64_t seed) {
  validate_config(config);

  DatasetSplit split;
  split.seed = seed;
  split.config = config;

  std::vector<std::string> eligible = eligible_queries(corpus, graph);
  if (eligible.empty()) throw DataError("no eligible query papers in corpus");

  const std::vector<std::string> sorted_ids = corpus.sorted_ids();

  // Partition eligible queries.
  Rng partition_rng(derive_seed(seed, "split/partition"));
  partition_rng.shuffle(eligible);
  const std::size_t n = eligible.size();
  const std::size_t n_validation =
      static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(n)));
  const std::size_t n_test =
      static_cast<std::size_t>(std::llround(config.test_fraction * static_cast<double>(n)));
  if (n_validation + n_test >= n) {
    throw DataError("corpus too small to split: " + std::to_string(n) + " eligible queries");
  }
  const std::size_t n_train = n - n_validation - n_test;

  split.train_queries.assign(eligible.begin(), eligible.begin() + n_train);
  split.validation_queries.assign(eligible.begin() + n_train,
                                  eligible.begin() + n_train + n_validation);
  split.test_queries.assign(eligible.begin() + n_train + n_validation, eligible.end());
  std::sort(split.train_queries.begin(), split.train_queries.end());
  std::sort(split.validation_queries.begin(), split.validation_queries.end());
  std::sort(split.test_queries.begin(), split.test_queries.end());

  // Validation/test queries and their references stay out of the train
  // random-negative pools; they must remain usable as evaluation candidates
  // (positives and hard negatives are graph-forced and stay uniform).
  std::unordered_set<std::string> reserve;
  for (const std::vector<std::string>* queries :
       {&split.validation_queries, &split.test_queries}) {
    for (const std::string& query_id : *queries) {
      reserve.insert(query_id);
      for (const std::string& ref : graph.out(query_id)) reserve.insert(ref);
    }
  }

  // Train triples: one positive per query, paired against one hard negative
  // (or a substitute random) plus the configured random negatives.
  for (const std::string& query_id : split.train_queries) {
    Rng query_rng(derive_seed(seed, "split/train/" + query_id));
    const std::vector<std::string>& references = graph.out(query_id);
    const std::string& positive = references[query_rng.index(references.size())];

    std::vector<std::string> hard_pool = hard_negatives(graph, query_id);
    std::string hard_id;
    bool substituted = hard_pool.empty();
    if (!substituted) hard_id = hard_pool[query_rng.index(hard_pool.size())];

    std::size_t random_needed = static_cast<std::size_t>(config.random_negatives_per_query);
    if (substituted) ++random_needed;

    std::vector<std::string> pool = negative_pool(sorted_ids, query_id, references, reserve);
    if (!hard_id.empty()) {
      auto it = std::lower_bound(pool.begin(), pool.end(), hard_id);
      if (it != pool.end() && *it == hard_id) pool.erase(it);
    }
    if (pool.size() < random_needed) {
      throw DataError("corpus too small for train negatives of query " + query_id + ": need " +
                      std::to_string(random_needed) + ", have " + std::to_string(pool.size()));
    }
    std::vector<std::string> randoms = query_rng.sample(std::move(pool), random_needed);

    if (substituted) {
      ++split.report.hard_negative_substitutions;
    } else {
      split.train.push_back({query_id, positive, hard_id, NegativeKind::hard});
    }
    for (std::string& negative : randoms) {
      split.train.push_back({query_id, positive, std::move(negative), NegativeKind::random});
    }
  }

  // Every id touched by a train triple is off limits as an evaluation candidate.
  std::unordered_set<std::string> train_ids;
  for (const Triplet& triplet : split.train) {
    train_ids.insert(triplet.query_id);
    train_ids.insert(triplet.positive_id);
    train_ids.insert(triplet.negative_id);
  }

  auto build_cases = [&](const std::vector<std::string>& queries, const char* tag) {
    std::vector<EvaluationCase> cases;
    for (const std::string& query_id : queries) {
      Rng query_rng(derive_seed(seed, std::string("split/") + tag + "/" + query_id));
      const std::vector<std::string>& references = graph.out(query_id);

      std::vector<std::string> positives;
      for (const std::string& ref : references) {
        if (train_ids.count(ref) == 0) positives.push_back(ref);
      }
      if (positives.empty()) {
        ++split.report.dropped_eval_cases;
        continue;
      }
      if (config.eval_positives_cap > 0 &&
          positives.size() > static_cast<std::size_t>(config.eval_positives_cap)) {
        positives = query_rng.sample(std::move(positives),
                                     static_cast<std::size_t>(config.eval_positives_cap));
        std::sort(positives.begin(), positives.end());
      }

      std::vector<std::string> pool = negative_pool(sorted_ids, query_id, references, train_ids);
      const std::size_t needed = static_cast<std::size_t>(config.eval_negatives);
      if (pool.size() < needed) {
        throw DataError("corpus too small for evaluation negatives of query " + query_id +
                        ": need " + std::to_string(needed) + ", have " +
                        std::to_string(pool.size()));
      }
      std::vector<std::string> negatives = query_rng.sample(std::move(pool), needed);
      std::sort(negatives.begin(), negatives.end());

      cases.push_back({query_id, std::move(positives), std::move(negatives)});
    }
    return cases;
  };

  split.validation = build_cases(split.validation_queries, "validation");
  split.test = build_cases(split.test_queries, "test");
  return split;
}

namespace {

ordered_json config_to_json(const SplitConfig& config) {
  ordered_json object;
  object["train_fraction"] = config.train_fraction;
  object["validation_fraction"] = config.validation_fraction;
  object["test_fraction"] = config.test_fraction;
  object["random_negatives_per_query"] = config.random_negatives_per_query;
  object["eval_negatives"] = config.eval_negatives;
  object["eval_positives_cap"] = config.eval_positives_cap;
  return object;
}

SplitConfig config_from_json(const nlohmann::json& object) {
  SplitConfig config;
  config.train_fraction = object.at("train_fraction").get<double>();
  config.validation_fraction = object.at("validation_fraction").get<double>();
  config.test_fraction = object.at("test_fraction").get<double>();
  config.random_negatives_per_query = object.at("random_negatives_per_query").get<int>();
  config.eval_negatives = object.at("eval_negatives").get<int>();
  config.eval_positives_cap = object.at("eval_positives_cap").get<int>();
  return config;
}

ordered_json cases_to_json(const std::vector<EvaluationCase>& cases) {
  ordered_json array = ordered_json::array();
  for (const EvaluationCase& c : cases) {
    ordered_json object;
    object["query"] = c.query_id;
    object["positives"] = c.positives;
    object["negatives"] = c.negatives;
    array.push_back(std::move(object));
  }
  return array;
}

std::vector<EvaluationCase> cases_from_json(const nlohmann::json& array) {
  std::vector<EvaluationCase> cases;
  for (const auto& object : array) {
    EvaluationCase c;
    c.query_id = object.at("query").get<std::string>();
    c.positives = object.at("positives").get<std::vector<std::string>>();
    c.negatives = object.at("negatives").get<std::vector<std::string>>();
    cases.push_back(std::move(c));
  }
  return cases;
}

}  // namespace

void save_split(const DatasetSplit& split, const std::filesystem::path& path) {
  ordered_json object;
  object["format_version"] = 1;
  object["seed"] = split.seed;
  object["config"] = config_to_json(split.config);
  object["report"] = {{"hard_negative_substitutions", split.report.hard_negative_substitutions},
                      {"dropped_eval_cases", split.report.dropped_eval_cases}};
  object["queries"] = {{"train", split.train_queries},
                       {"validation", split.validation_queries},
                       {"test", split.test_queries}};
  ordered_json triples = ordered_json::array();
  for (const Triplet& t : split.train) {
    triples.push_back({{"query", t.query_id},
                       {"positive", t.positive_id},
                       {"negative", t.negative_id},
                       {"kind", negative_kind_name(t.negative_kind)}});
  }
  object["train_triples"] = std::move(triples);
  object["validation_cases"] = cases_to_json(split.validation);
  object["test_cases"] = cases_to_json(split.test);

  std::ofstream out(path);
  if (!out) throw DataError("cannot write split manifest: " + path.string());
  out << object.dump(2) << '\n';
  if (!out) throw DataError("failed writing split manifest: " + path.string());
}

DatasetSplit load_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read split manifest: " + path.string());
  nlohmann::json object = nlohmann::json::parse(in, nullptr, false);
  if (object.is_discarded()) throw DataError("malformed split manifest: " + path.string());

  DatasetSplit split;
  split.seed = object.at("seed").get<std::uint64_t>();
  split.config = config_from_json(object.at("config"));
  split.report.hard_negative_substitutions =
      object.at("report").at("hard_negative_substitutions").get<std::size_t>();
  split.report.dropped_eval_cases = object.at("report").at("dropped_eval_cases").get<std::size_t>();
  split.train_queries = object.at("queries").at("train").get<std::vector<std::string>>();
  split.validation_queries = object.at("queries").at("validation").get<std::vector<std::string>>();
  split.test_queries = object.at("queries").at("test").get<std::vector<std::string>>();
  for (const auto& entry : object.at("train_triples")) {
    Triplet t;
    t.query_id = entry.at("query").get<std::string>();
    t.positive_id = entry.at("positive").get<std::string>();
    t.negative_id = entry.at("negative").get<std::string>();
    t.negative_kind = negative_kind_from_name(entry.at("kind").get<std::string>());
    split.train.push_back(std::move(t));
  }
  split.validation = cases_from_json(object.at("validation_cases"));
  split.test = cases_from_json(object.at("test_cases"));
  return split;
}

}  // namespace sectra
