#include "sectra/evaluator.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sectra/errors.hpp"

namespace sectra {

using ordered_json = nlohmann::ordered_json;

double cosine(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) throw DataError("cosine expects equal dimensions");
  const double norm_u = u.norm();
  const double norm_v = v.norm();
  if (norm_u == 0.0 || norm_v == 0.0) return 0.0;
  return u.dot(v) / (norm_u * norm_v);
}

RankedList rank(const std::string& query_id, const Vector& query_vec,
                const std::vector<std::pair<std::string, Vector>>& candidates) {
  RankedList ranked;
  ranked.query_id = query_id;
  ranked.items.reserve(candidates.size());
  for (const auto& [id, vec] : candidates) {
    ranked.items.push_back({id, cosine(query_vec, vec)});
  }
  std::sort(ranked.items.begin(), ranked.items.end(),
            [](const ScoredCandidate& a, const ScoredCandidate& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.id < b.id;
            });
  return ranked;
}

double average_precision(const RankedList& ranked, const std::set<std::string>& relevant) {
  if (relevant.empty()) throw DataError("average_precision expects a non-empty relevant set");
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < ranked.items.size(); ++k) {
    if (relevant.count(ranked.items[k].id) != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return sum / static_cast<double>(relevant.size());
}

double reciprocal_rank(const RankedList& ranked, const std::set<std::string>& relevant) {
  for (std::size_t k = 0; k < ranked.items.size(); ++k) {
    if (relevant.count(ranked.items[k].id) != 0) {
      return 1.0 / static_cast<double>(k + 1);
    }
  }
  return 0.0;
}

MetricsReport evaluate_cases(const std::vector<EvaluationCase>& cases,
                             const RepresentationFn& representation,
                             std::vector<RankedList>* ranked_out) {
  MetricsReport report;
  for (const EvaluationCase& evaluation_case : cases) {
    const std::set<std::string> relevant(evaluation_case.positives.begin(),
                                         evaluation_case.positives.end());
    if (relevant.empty()) {
      ++report.skipped;
      continue;
    }
    std::vector<std::pair<std::string, Vector>> candidates;
    candidates.reserve(evaluation_case.positives.size() + evaluation_case.negatives.size());
    for (const std::string& id : evaluation_case.positives) {
      candidates.emplace_back(id, representation(id));
    }
    for (const std::string& id : evaluation_case.negatives) {
      candidates.emplace_back(id, representation(id));
    }

    const RankedList ranked =
        rank(evaluation_case.query_id, representation(evaluation_case.query_id), candidates);

    report.map += average_precision(ranked, relevant);
    report.mrr += reciprocal_rank(ranked, relevant);

    std::size_t hits = 0;
    std::size_t position = 0;
    for (int n = 1; n <= kMaxCutoff; ++n) {
      while (position < std::min<std::size_t>(ranked.items.size(), static_cast<std::size_t>(n))) {
        if (relevant.count(ranked.items[position].id) != 0) ++hits;
        ++position;
      }
      const double precision = static_cast<double>(hits) / static_cast<double>(n);
      const double recall = static_cast<double>(hits) / static_cast<double>(relevant.size());
      report.precision_at[static_cast<std::size_t>(n - 1)] += precision;
      report.recall_at[static_cast<std::size_t>(n - 1)] += recall;
      report.f1_at[static_cast<std::size_t>(n - 1)] +=
          (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
    ++report.query_count;
    if (ranked_out != nullptr) ranked_out->push_back(ranked);
  }

  if (report.query_count > 0) {
    const double denom = static_cast<double>(report.query_count);
    report.map /= denom;
    report.mrr /= denom;
    for (int n = 0; n < kMaxCutoff; ++n) {
      report.precision_at[static_cast<std::size_t>(n)] /= denom;
      report.recall_at[static_cast<std::size_t>(n)] /= denom;
      report.f1_at[static_cast<std::size_t>(n)] /= denom;
    }
  }
  return report;
}

const char* rank_space_name(RankSpace space) {
  return space == RankSpace::h_paper ? "h_paper" : "z_paper";
}

RankSpace rank_space_from_name(const std::string& name) {
  if (name == "h_paper") return RankSpace::h_paper;
  if (name == "z_paper") return RankSpace::z_paper;
  throw UsageError("unknown rank space: " + name);
}

Vector ranking_representation(PaperEmbeddingIndex& index, const ModelParams& params,
                              const std::string& id, RankSpace space) {
  const PaperRepresentation repr = represent_from_embeddings(index.embeddings(id), params);
  return space == RankSpace::h_paper ? repr.h_paper : repr.z_paper;
}

const char* ablation_pattern_name(AblationPattern pattern) {
  switch (pattern) {
    case AblationPattern::raw_sections: return "1_raw_sections";
    case AblationPattern::titled_sections: return "2_titled_sections";
    case AblationPattern::attended_sections: return "3_attended_sections";
    case AblationPattern::abstract_only: return "4_abstract_only";
    case AblationPattern::full: return "full";
  }
  return "full";
}

Vector pattern_representation(AblationPattern pattern, const std::string& id,
                              PaperEmbeddingIndex& index, const ModelParams& params) {
  switch (pattern) {
    case AblationPattern::raw_sections: {
      const std::array<Vector, 3>& raw = index.raw_section_embeddings(id);
      return aggregate_sections(raw);
    }
    case AblationPattern::titled_sections: {
      const SectionEmbeddings& base = index.embeddings(id);
      return aggregate_sections(base.sections);
    }
    case AblationPattern::attended_sections: {
      const SectionEmbeddings& base = index.embeddings(id);
      const AttentionOutput attention = attend(params.attention, base.sections);
      return aggregate_sections(attention.refined);
    }
    case AblationPattern::abstract_only:
      return index.embeddings(id).abstract_vec;
    case AblationPattern::full:
      return represent_from_embeddings(index.embeddings(id), params).h_paper;
  }
  throw UsageError("unknown ablation pattern");
}

MetricsRow metrics_row(const MetricsReport& report) {
  MetricsRow row;
  row.recall5 = report.recall_at[4];
  row.precision5 = report.precision_at[4];
  row.map = report.map;
  row.mrr = report.mrr;
  return row;
}

std::vector<AblationRow> ablation(const std::vector<EvaluationCase>& cases,
                                  PaperEmbeddingIndex& index, const ModelParams& params) {
  const std::array<AblationPattern, 5> patterns = {
      AblationPattern::full, AblationPattern::raw_sections, AblationPattern::titled_sections,
      AblationPattern::attended_sections, AblationPattern::abstract_only};

  std::vector<AblationRow> rows;
  for (AblationPattern pattern : patterns) {
    const MetricsReport report = evaluate_cases(cases, [&](const std::string& id) {
      return pattern_representation(pattern, id, index, params);
    });
    rows.push_back({ablation_pattern_name(pattern), metrics_row(report)});
  }
  return rows;
}

std::vector<double> default_alphas() {
  std::vector<double> alphas;
  for (int i = 0; i <= 10; ++i) alphas.push_back(static_cast<double>(i) / 10.0);
  return alphas;
}

std::vector<AlphaRow> alpha_sweep(const std::vector<EvaluationCase>& cases,
                                  PaperEmbeddingIndex& index, const ModelParams& params,
                                  const std::vector<double>& alphas) {
  // alpha enters only the final combination, so the attention output and the
  // abstract embedding are computed once per paper.
  std::unordered_map<std::string, std::pair<Vector, Vector>> components;
  auto components_of = [&](const std::string& id) -> const std::pair<Vector, Vector>& {
    auto it = components.find(id);
    if (it != components.end()) return it->second;
    const SectionEmbeddings& base = index.embeddings(id);
    const AttentionOutput attention = attend(params.attention, base.sections);
    return components
        .emplace(id, std::make_pair(aggregate_sections(attention.refined), base.abstract_vec))
        .first->second;
  };

  std::vector<AlphaRow> rows;
  for (double alpha : alphas) {
    const MetricsReport report = evaluate_cases(cases, [&](const std::string& id) {
      const auto& [h_sections, h_abstract] = components_of(id);
      return combine(h_sections, h_abstract, alpha);
    });
    rows.push_back({alpha, metrics_row(report)});
  }
  return rows;
}

ReprStudyResult representation_study(const DatasetSplit& split, PaperEmbeddingIndex& index,
                                     const ModelParams& init, const TrainingConfig& config) {
  struct Configuration {
    RankSpace rank_on;
    LossSpace loss_on;
  };
  const std::array<Configuration, 3> configurations = {{
      {RankSpace::h_paper, LossSpace::z_paper},
      {RankSpace::h_paper, LossSpace::h_paper},
      {RankSpace::z_paper, LossSpace::z_paper},
  }};

  EmbeddingLookup lookup = [&index](const std::string& id) -> const SectionEmbeddings& {
    return index.embeddings(id);
  };

  ReprStudyResult result;
  for (const Configuration& configuration : configurations) {
    TrainingConfig training = config;
    training.loss_on = configuration.loss_on;

    ValidationFn validation;
    if (!split.validation.empty()) {
      validation = [&, configuration](const ModelParams& snapshot) {
        const MetricsReport report =
            evaluate_cases(split.validation, [&](const std::string& id) {
              return ranking_representation(index, snapshot, id, configuration.rank_on);
            });
        return std::make_pair(report.map, report.mrr);
      };
    }

    const TrainingRun run = train(split.train, lookup, init, training, validation);
    const MetricsReport report = evaluate_cases(split.test, [&](const std::string& id) {
      return ranking_representation(index, run.final_params, id, configuration.rank_on);
    });

    ReprStudyRow row;
    row.representation = rank_space_name(configuration.rank_on);
    row.nonlinear_loss = configuration.loss_on == LossSpace::z_paper;
    row.metrics = metrics_row(report);
    result.rows.push_back(std::move(row));
    result.checkpoints.push_back(run.final_params);
  }
  return result;
}

namespace {

ordered_json metrics_row_json(const MetricsRow& row) {
  ordered_json object;
  object["recall@5"] = row.recall5;
  object["precision@5"] = row.precision5;
  object["map"] = row.map;
  object["mrr"] = row.mrr;
  return object;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << contents;
  if (!out) throw DataError("failed writing file: " + path.string());
}

std::string format_double(double value) {
  ordered_json holder = value;
  return holder.dump();  // shortest round-trip representation
}

}  // namespace

void write_metrics_json(const MetricsReport& report, const std::filesystem::path& path) {
  ordered_json object;
  object["map"] = report.map;
  object["mrr"] = report.mrr;
  object["query_count"] = report.query_count;
  object["skipped"] = report.skipped;
  ordered_json per_n = ordered_json::array();
  for (int n = 1; n <= kMaxCutoff; ++n) {
    ordered_json row;
    row["n"] = n;
    row["precision"] = report.precision_at[static_cast<std::size_t>(n - 1)];
    row["recall"] = report.recall_at[static_cast<std::size_t>(n - 1)];
    row["f1"] = report.f1_at[static_cast<std::size_t>(n - 1)];
    per_n.push_back(std::move(row));
  }
  object["per_n"] = std::move(per_n);
  write_text_file(path, object.dump(2) + "\n");
}

void write_per_n_csv(const MetricsReport& report, const std::filesystem::path& path) {
  std::string csv = "N,precision,recall,f1\n";
  for (int n = 1; n <= kMaxCutoff; ++n) {
    csv += std::to_string(n) + "," + format_double(report.precision_at[static_cast<std::size_t>(n - 1)]) +
           "," + format_double(report.recall_at[static_cast<std::size_t>(n - 1)]) + "," +
           format_double(report.f1_at[static_cast<std::size_t>(n - 1)]) + "\n";
  }
  write_text_file(path, csv);
}

void write_ablation_table(const std::vector<AblationRow>& rows,
                          const std::filesystem::path& csv_path,
                          const std::filesystem::path& json_path) {
  std::string csv = "pattern,recall@5,precision@5,MAP,MRR\n";
  ordered_json array = ordered_json::array();
  for (const AblationRow& row : rows) {
    csv += row.pattern + "," + format_double(row.metrics.recall5) + "," +
           format_double(row.metrics.precision5) + "," + format_double(row.metrics.map) + "," +
           format_double(row.metrics.mrr) + "\n";
    ordered_json object;
    object["pattern"] = row.pattern;
    object.update(metrics_row_json(row.metrics));
    array.push_back(std::move(object));
  }
  write_text_file(csv_path, csv);
  write_text_file(json_path, array.dump(2) + "\n");
}

void write_alpha_table(const std::vector<AlphaRow>& rows, const std::filesystem::path& csv_path,
                       const std::filesystem::path& json_path) {
  std::string csv = "alpha,one_minus_alpha,recall@5,precision@5,MAP,MRR\n";
  ordered_json array = ordered_json::array();
  for (const AlphaRow& row : rows) {
    csv += format_double(row.alpha) + "," + format_double(1.0 - row.alpha) + "," +
           format_double(row.metrics.recall5) + "," + format_double(row.metrics.precision5) +
           "," + format_double(row.metrics.map) + "," + format_double(row.metrics.mrr) + "\n";
    ordered_json object;
    object["alpha"] = row.alpha;
    object["one_minus_alpha"] = 1.0 - row.alpha;
    object.update(metrics_row_json(row.metrics));
    array.push_back(std::move(object));
  }
  write_text_file(csv_path, csv);
  write_text_file(json_path, array.dump(2) + "\n");
}

void write_repr_table(const std::vector<ReprStudyRow>& rows,
                      const std::filesystem::path& csv_path,
                      const std::filesystem::path& json_path) {
  std::string csv = "representation,nonlinear_loss,recall@5,precision@5,MAP,MRR\n";
  ordered_json array = ordered_json::array();
  for (const ReprStudyRow& row : rows) {
    csv += row.representation + std::string(",") + (row.nonlinear_loss ? "yes" : "no") + "," +
           format_double(row.metrics.recall5) + "," + format_double(row.metrics.precision5) +
           "," + format_double(row.metrics.map) + "," + format_double(row.metrics.mrr) + "\n";
    ordered_json object;
    object["representation"] = row.representation;
    object["nonlinear_loss"] = row.nonlinear_loss;
    object.update(metrics_row_json(row.metrics));
    array.push_back(std::move(object));
  }
  write_text_file(csv_path, csv);
  write_text_file(json_path, array.dump(2) + "\n");
}

}  // namespace sectra
