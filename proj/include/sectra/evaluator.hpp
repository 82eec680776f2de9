#ifndef SECTRA_EVALUATOR_HPP_
#define SECTRA_EVALUATOR_HPP_

#include <array>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "sectra/model.hpp"
#include "sectra/split.hpp"
#include "sectra/trainer.hpp"

namespace sectra {

inline constexpr int kMaxCutoff = 20;  // per-N tables cover N = 1..20

double cosine(const Vector& u, const Vector& v);  // zero vectors score 0

struct ScoredCandidate {
  std::string id;
  double score = 0.0;
};

struct RankedList {
  std::string query_id;
  std::vector<ScoredCandidate> items;  // scores non-increasing, ties by id
};

RankedList rank(const std::string& query_id, const Vector& query_vec,
                const std::vector<std::pair<std::string, Vector>>& candidates);

// Eq.-style AP over the full candidate list; relevant_set must be non-empty.
double average_precision(const RankedList& ranked, const std::set<std::string>& relevant);
double reciprocal_rank(const RankedList& ranked, const std::set<std::string>& relevant);

struct MetricsReport {
  double map = 0.0;
  double mrr = 0.0;
  std::array<double, kMaxCutoff> precision_at{};  // index i holds N = i + 1
  std::array<double, kMaxCutoff> recall_at{};
  std::array<double, kMaxCutoff> f1_at{};
  std::size_t query_count = 0;
  std::size_t skipped = 0;  // cases with an empty relevant set
};

using RepresentationFn = std::function<Vector(const std::string& paper_id)>;

// Ranks every case's candidates by cosine similarity of the supplied
// representations and averages AP, RR, and the per-N metrics over queries.
MetricsReport evaluate_cases(const std::vector<EvaluationCase>& cases,
                             const RepresentationFn& representation,
                             std::vector<RankedList>* ranked_out = nullptr);

enum class RankSpace { h_paper, z_paper };

const char* rank_space_name(RankSpace space);
RankSpace rank_space_from_name(const std::string& name);

// Ranking vector of one paper under the trained model.
Vector ranking_representation(PaperEmbeddingIndex& index, const ModelParams& params,
                              const std::string& id, RankSpace space = RankSpace::h_paper);

// Pipeline variants isolating the model's components.
enum class AblationPattern {
  raw_sections,       // mean of bare section embeddings, no title, no attention
  titled_sections,    // mean of title-prefixed section embeddings
  attended_sections,  // h_sections (attention output)
  abstract_only,      // h_abstract
  full,               // alpha combination (the proposed representation)
};

const char* ablation_pattern_name(AblationPattern pattern);

Vector pattern_representation(AblationPattern pattern, const std::string& id,
                              PaperEmbeddingIndex& index, const ModelParams& params);

struct MetricsRow {
  double recall5 = 0.0;
  double precision5 = 0.0;
  double map = 0.0;
  double mrr = 0.0;
};

MetricsRow metrics_row(const MetricsReport& report);

struct AblationRow {
  std::string pattern;
  MetricsRow metrics;
};

// One row per pattern (full first, matching the published table), all under
// the same trained checkpoint and split.
std::vector<AblationRow> ablation(const std::vector<EvaluationCase>& cases,
                                  PaperEmbeddingIndex& index, const ModelParams& params);

struct AlphaRow {
  double alpha = 0.0;
  MetricsRow metrics;
};

std::vector<double> default_alphas();  // 0.0, 0.1, ..., 1.0

// Re-evaluates one checkpoint across alphas; h_sections and h_abstract are
// cached per paper since alpha only enters the final combination.
std::vector<AlphaRow> alpha_sweep(const std::vector<EvaluationCase>& cases,
                                  PaperEmbeddingIndex& index, const ModelParams& params,
                                  const std::vector<double>& alphas = default_alphas());

struct ReprStudyRow {
  std::string representation;  // ranking vector
  bool nonlinear_loss = false; // loss computed on z_paper
  MetricsRow metrics;
};

struct ReprStudyResult {
  std::vector<ReprStudyRow> rows;          // (h, loss z), (h, loss h), (z, loss z)
  std::vector<ModelParams> checkpoints;    // one per configuration
};

// Trains the three loss/ranking configurations under one seed and evaluates
// each on the test cases.
ReprStudyResult representation_study(const DatasetSplit& split, PaperEmbeddingIndex& index,
                                     const ModelParams& init, const TrainingConfig& config);

void write_metrics_json(const MetricsReport& report, const std::filesystem::path& path);
void write_per_n_csv(const MetricsReport& report, const std::filesystem::path& path);
void write_ablation_table(const std::vector<AblationRow>& rows,
                          const std::filesystem::path& csv_path,
                          const std::filesystem::path& json_path);
void write_alpha_table(const std::vector<AlphaRow>& rows, const std::filesystem::path& csv_path,
                       const std::filesystem::path& json_path);
void write_repr_table(const std::vector<ReprStudyRow>& rows,
                      const std::filesystem::path& csv_path,
                      const std::filesystem::path& json_path);

}  // namespace sectra

#endif  // SECTRA_EVALUATOR_HPP_
