#ifndef SECTRA_TRAINER_HPP_
#define SECTRA_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sectra/model.hpp"
#include "sectra/split.hpp"

namespace sectra {

// Which vector the triplet loss is computed on. Ranking always has its own,
// independent choice (see evaluator).
enum class LossSpace { z_paper, h_paper };

const char* loss_space_name(LossSpace space);
LossSpace loss_space_from_name(const std::string& name);

struct TrainingConfig {
  double margin = 1.0;
  int epochs = 4;
  int batch_size = 3;
  double learning_rate = 5e-5;
  double weight_decay = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  LossSpace loss_on = LossSpace::z_paper;
};

void validate_training(const TrainingConfig& config);

double l2_distance(const Vector& u, const Vector& v);

// max(d(a,p) - d(a,n) + margin, 0). The subgradient at the kink is zero.
double triplet_loss(const Vector& anchor, const Vector& positive, const Vector& negative,
                    double margin);

// Gradient accumulators; alpha is a hyperparameter and has no slot here.
struct ModelGrads {
  Eigen::MatrixXd wq, wk, wv, wo, w1, w2;
  Eigen::VectorXd bq, bk, bv, bo, b1, b2;

  static ModelGrads zeros_like(const ModelParams& params);
  double max_abs() const;
};

using EmbeddingLookup = std::function<const SectionEmbeddings&(const std::string& paper_id)>;

struct BatchResult {
  double mean_loss = 0.0;
  ModelGrads grads;  // of the mean batch loss; embedding providers are frozen
};

// Exact analytic gradients of the mean triplet loss over the batch with
// respect to every attention and MLP parameter.
BatchResult batch_gradients(const ModelParams& params, const std::vector<Triplet>& batch,
                            const EmbeddingLookup& lookup, LossSpace loss_on, double margin);

struct AdamState {
  ModelGrads first_moment;
  ModelGrads second_moment;
  long step = 0;

  static AdamState zeros_like(const ModelParams& params);
};

// Adam with bias correction. Weight decay is coupled (added to the gradient
// before the moment updates) and applies to matrices only, never biases.
void adam_step(ModelParams& params, const ModelGrads& grads, AdamState& state,
               const TrainingConfig& config);

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double val_map = 0.0;
  double val_mrr = 0.0;
  double seconds = 0.0;
};

struct TrainingRun {
  std::vector<EpochStats> epochs;
  ModelParams final_params;  // best validation MAP; last epoch when no validation
  int best_epoch = 0;        // 0 means the initialization
};

// Returns (MAP, MRR) on the validation cases for a parameter snapshot.
using ValidationFn = std::function<std::pair<double, double>(const ModelParams&)>;

// Shuffles triples per epoch under the config seed, steps Adam per batch,
// evaluates validation MAP after each epoch, and keeps the best checkpoint.
TrainingRun train(const std::vector<Triplet>& triples, const EmbeddingLookup& lookup,
                  const ModelParams& init, const TrainingConfig& config,
                  const ValidationFn& validation = nullptr);

void append_training_log(const TrainingRun& run, const std::filesystem::path& path);

}  // namespace sectra

#endif  // SECTRA_TRAINER_HPP_
