#include "sectra/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sectra/errors.hpp"
#include "sectra/rng.hpp"

namespace sectra {

using ordered_json = nlohmann::ordered_json;

const char* loss_space_name(LossSpace space) {
  return space == LossSpace::z_paper ? "z_paper" : "h_paper";
}

LossSpace loss_space_from_name(const std::string& name) {
  if (name == "z_paper") return LossSpace::z_paper;
  if (name == "h_paper") return LossSpace::h_paper;
  throw UsageError("unknown loss space: " + name);
}

void validate_training(const TrainingConfig& config) {
  if (config.margin <= 0.0) throw UsageError("margin must be > 0");
  if (config.epochs < 0) throw UsageError("epochs must be >= 0");
  if (config.batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (config.learning_rate <= 0.0) throw UsageError("learning_rate must be > 0");
  if (config.weight_decay < 0.0) throw UsageError("weight_decay must be >= 0");
  if (config.adam_beta1 <= 0.0 || config.adam_beta1 >= 1.0 || config.adam_beta2 <= 0.0 ||
      config.adam_beta2 >= 1.0) {
    throw UsageError("adam betas must lie in (0, 1)");
  }
  if (config.adam_eps <= 0.0) throw UsageError("adam_eps must be > 0");
}

double l2_distance(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) throw DataError("l2_distance expects equal dimensions");
  return (u - v).norm();
}

double triplet_loss(const Vector& anchor, const Vector& positive, const Vector& negative,
                    double margin) {
  if (margin <= 0.0) throw UsageError("margin must be > 0");
  const double violation =
      l2_distance(anchor, positive) - l2_distance(anchor, negative) + margin;
  return violation > 0.0 ? violation : 0.0;
}

ModelGrads ModelGrads::zeros_like(const ModelParams& params) {
  ModelGrads grads;
  grads.wq = Eigen::MatrixXd::Zero(params.attention.wq.rows(), params.attention.wq.cols());
  grads.wk = Eigen::MatrixXd::Zero(params.attention.wk.rows(), params.attention.wk.cols());
  grads.wv = Eigen::MatrixXd::Zero(params.attention.wv.rows(), params.attention.wv.cols());
  grads.wo = Eigen::MatrixXd::Zero(params.attention.wo.rows(), params.attention.wo.cols());
  grads.w1 = Eigen::MatrixXd::Zero(params.mlp.w1.rows(), params.mlp.w1.cols());
  grads.w2 = Eigen::MatrixXd::Zero(params.mlp.w2.rows(), params.mlp.w2.cols());
  grads.bq = Eigen::VectorXd::Zero(params.attention.bq.size());
  grads.bk = Eigen::VectorXd::Zero(params.attention.bk.size());
  grads.bv = Eigen::VectorXd::Zero(params.attention.bv.size());
  grads.bo = Eigen::VectorXd::Zero(params.attention.bo.size());
  grads.b1 = Eigen::VectorXd::Zero(params.mlp.b1.size());
  grads.b2 = Eigen::VectorXd::Zero(params.mlp.b2.size());
  return grads;
}

double ModelGrads::max_abs() const {
  double m = 0.0;
  for (const Eigen::MatrixXd* matrix : {&wq, &wk, &wv, &wo, &w1, &w2}) {
    if (matrix->size() > 0) m = std::max(m, matrix->cwiseAbs().maxCoeff());
  }
  for (const Eigen::VectorXd* vec : {&bq, &bk, &bv, &bo, &b1, &b2}) {
    if (vec->size() > 0) m = std::max(m, vec->cwiseAbs().maxCoeff());
  }
  return m;
}

namespace {

// Every intermediate needed to backpropagate through one paper's forward pass.
struct ForwardTrace {
  Eigen::MatrixXd input;   // 3 x d section embeddings, rows in fixed order
  Eigen::MatrixXd q, k, v; // 3 x d
  std::vector<Eigen::Matrix3d> weights;
  Eigen::MatrixXd concat;  // 3 x d, per-head attention outputs
  Vector h_sections;
  Vector h_paper;
  Vector pre_relu;         // hidden
  Vector post_relu;        // hidden
  Vector z;
};

ForwardTrace forward_trace(const ModelParams& params, const SectionEmbeddings& base) {
  const int d = params.dimension;
  const int head_size = d / params.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_size));

  ForwardTrace trace;
  trace.input.resize(3, d);
  for (int i = 0; i < 3; ++i) {
    if (base.sections[static_cast<std::size_t>(i)].size() != d) {
      throw DataError("section embedding dimension does not match model dimension");
    }
    trace.input.row(i) = base.sections[static_cast<std::size_t>(i)].transpose();
  }

  trace.q = trace.input * params.attention.wq.transpose();
  trace.k = trace.input * params.attention.wk.transpose();
  trace.v = trace.input * params.attention.wv.transpose();
  trace.q.rowwise() += params.attention.bq.transpose();
  trace.k.rowwise() += params.attention.bk.transpose();
  trace.v.rowwise() += params.attention.bv.transpose();

  trace.concat.resize(3, d);
  for (int h = 0; h < params.heads; ++h) {
    const auto qh = trace.q.middleCols(h * head_size, head_size);
    const auto kh = trace.k.middleCols(h * head_size, head_size);
    const auto vh = trace.v.middleCols(h * head_size, head_size);
    Eigen::Matrix3d scores = (qh * kh.transpose()) * scale;
    Eigen::Matrix3d weights;
    for (int row = 0; row < 3; ++row) {
      const double row_max = scores.row(row).maxCoeff();
      Eigen::Vector3d exps = (scores.row(row).transpose().array() - row_max).exp();
      weights.row(row) = (exps / exps.sum()).transpose();
    }
    trace.concat.middleCols(h * head_size, head_size) = weights * vh;
    trace.weights.push_back(weights);
  }

  Eigen::MatrixXd refined = trace.concat * params.attention.wo.transpose();
  refined.rowwise() += params.attention.bo.transpose();
  trace.h_sections = (refined.row(0) + refined.row(1) + refined.row(2)).transpose() / 3.0;
  trace.h_paper = params.alpha * trace.h_sections + (1.0 - params.alpha) * base.abstract_vec;
  trace.pre_relu = params.mlp.w1 * trace.h_paper + params.mlp.b1;
  trace.post_relu = trace.pre_relu.array().max(0.0).matrix();
  trace.z = params.mlp.w2 * trace.post_relu + params.mlp.b2;
  return trace;
}

const Vector& loss_vector(const ForwardTrace& trace, LossSpace space) {
  return space == LossSpace::z_paper ? trace.z : trace.h_paper;
}

// Accumulates parameter gradients for one paper given the gradient of the
// loss with respect to that paper's loss vector.
void backward_trace(const ModelParams& params, const ForwardTrace& trace,
                    const Vector& grad_out, LossSpace loss_on, ModelGrads& grads) {
  const int d = params.dimension;
  const int head_size = d / params.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_size));

  Vector grad_h(d);
  if (loss_on == LossSpace::z_paper) {
    const Vector& dz = grad_out;
    grads.w2.noalias() += dz * trace.post_relu.transpose();
    grads.b2 += dz;
    Vector dr = params.mlp.w2.transpose() * dz;
    Vector du = (trace.pre_relu.array() > 0.0).select(dr.array(), 0.0).matrix();
    grads.w1.noalias() += du * trace.h_paper.transpose();
    grads.b1 += du;
    grad_h = params.mlp.w1.transpose() * du;
  } else {
    grad_h = grad_out;
  }

  // h_paper = alpha * h_sections + (1 - alpha) * h_abstract; the abstract
  // branch is frozen input.
  const Vector grad_sections = params.alpha * grad_h;

  // h_sections is the mean of the three refined rows.
  Eigen::MatrixXd grad_refined(3, d);
  for (int i = 0; i < 3; ++i) grad_refined.row(i) = (grad_sections / 3.0).transpose();

  grads.wo.noalias() += grad_refined.transpose() * trace.concat;
  grads.bo += grad_refined.colwise().sum().transpose();
  Eigen::MatrixXd grad_concat = grad_refined * params.attention.wo;

  Eigen::MatrixXd grad_q = Eigen::MatrixXd::Zero(3, d);
  Eigen::MatrixXd grad_k = Eigen::MatrixXd::Zero(3, d);
  Eigen::MatrixXd grad_v = Eigen::MatrixXd::Zero(3, d);

  for (int h = 0; h < params.heads; ++h) {
    const auto qh = trace.q.middleCols(h * head_size, head_size);
    const auto kh = trace.k.middleCols(h * head_size, head_size);
    const auto vh = trace.v.middleCols(h * head_size, head_size);
    const Eigen::Matrix3d& weights = trace.weights[static_cast<std::size_t>(h)];
    const auto grad_oh = grad_concat.middleCols(h * head_size, head_size);

    Eigen::Matrix3d grad_weights = grad_oh * vh.transpose();
    grad_v.middleCols(h * head_size, head_size) = weights.transpose() * grad_oh;

    Eigen::Matrix3d grad_scores;
    for (int row = 0; row < 3; ++row) {
      const double dotted = grad_weights.row(row).dot(weights.row(row));
      const Eigen::RowVector3d centered =
          (grad_weights.row(row).array() - dotted).matrix();
      grad_scores.row(row) = weights.row(row).cwiseProduct(centered);
    }
    grad_q.middleCols(h * head_size, head_size) = scale * grad_scores * kh;
    grad_k.middleCols(h * head_size, head_size) = scale * grad_scores.transpose() * qh;
  }

  grads.wq.noalias() += grad_q.transpose() * trace.input;
  grads.wk.noalias() += grad_k.transpose() * trace.input;
  grads.wv.noalias() += grad_v.transpose() * trace.input;
  grads.bq += grad_q.colwise().sum().transpose();
  grads.bk += grad_k.colwise().sum().transpose();
  grads.bv += grad_v.colwise().sum().transpose();
}

}  // namespace

BatchResult batch_gradients(const ModelParams& params, const std::vector<Triplet>& batch,
                            const EmbeddingLookup& lookup, LossSpace loss_on, double margin) {
  if (batch.empty()) throw UsageError("batch_gradients expects a non-empty batch");

  BatchResult result;
  result.grads = ModelGrads::zeros_like(params);
  const double inverse_batch = 1.0 / static_cast<double>(batch.size());

  for (const Triplet& triplet : batch) {
    const ForwardTrace anchor = forward_trace(params, lookup(triplet.query_id));
    const ForwardTrace positive = forward_trace(params, lookup(triplet.positive_id));
    const ForwardTrace negative = forward_trace(params, lookup(triplet.negative_id));

    const Vector& za = loss_vector(anchor, loss_on);
    const Vector& zp = loss_vector(positive, loss_on);
    const Vector& zn = loss_vector(negative, loss_on);

    const Vector diff_positive = za - zp;
    const Vector diff_negative = za - zn;
    const double dist_positive = diff_positive.norm();
    const double dist_negative = diff_negative.norm();
    const double violation = dist_positive - dist_negative + margin;
    if (!std::isfinite(violation)) {
      throw NumericError("non-finite triplet loss for query " + triplet.query_id);
    }
    if (violation <= 0.0) continue;  // inactive hinge, zero subgradient
    result.mean_loss += violation * inverse_batch;

    Vector grad_anchor = Vector::Zero(za.size());
    if (dist_positive > 0.0) {
      const Vector unit = diff_positive / dist_positive;
      grad_anchor += unit;
      backward_trace(params, positive, Vector(-inverse_batch * unit), loss_on, result.grads);
    }
    if (dist_negative > 0.0) {
      const Vector unit = diff_negative / dist_negative;
      grad_anchor -= unit;
      backward_trace(params, negative, Vector(inverse_batch * unit), loss_on, result.grads);
    }
    backward_trace(params, anchor, Vector(inverse_batch * grad_anchor), loss_on, result.grads);
  }
  return result;
}

AdamState AdamState::zeros_like(const ModelParams& params) {
  AdamState state;
  state.first_moment = ModelGrads::zeros_like(params);
  state.second_moment = ModelGrads::zeros_like(params);
  return state;
}

namespace {

template <typename Tensor>
void adam_update(Tensor& param, const Tensor& grad, Tensor& first, Tensor& second,
                 bool apply_decay, const TrainingConfig& config, double bias1, double bias2) {
  Tensor g = grad;
  if (apply_decay && config.weight_decay > 0.0) g += config.weight_decay * param;
  first = config.adam_beta1 * first + (1.0 - config.adam_beta1) * g;
  second = config.adam_beta2 * second;
  second.array() += (1.0 - config.adam_beta2) * g.array().square();
  const auto corrected_first = first.array() / bias1;
  const auto corrected_second = second.array() / bias2;
  param.array() -= config.learning_rate * corrected_first /
                   (corrected_second.sqrt() + config.adam_eps);
}

}  // namespace

void adam_step(ModelParams& params, const ModelGrads& grads, AdamState& state,
               const TrainingConfig& config) {
  validate_training(config);
  ++state.step;
  const double bias1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state.step));

  adam_update(params.attention.wq, grads.wq, state.first_moment.wq, state.second_moment.wq,
              true, config, bias1, bias2);
  adam_update(params.attention.wk, grads.wk, state.first_moment.wk, state.second_moment.wk,
              true, config, bias1, bias2);
  adam_update(params.attention.wv, grads.wv, state.first_moment.wv, state.second_moment.wv,
              true, config, bias1, bias2);
  adam_update(params.attention.wo, grads.wo, state.first_moment.wo, state.second_moment.wo,
              true, config, bias1, bias2);
  adam_update(params.mlp.w1, grads.w1, state.first_moment.w1, state.second_moment.w1, true,
              config, bias1, bias2);
  adam_update(params.mlp.w2, grads.w2, state.first_moment.w2, state.second_moment.w2, true,
              config, bias1, bias2);
  adam_update(params.attention.bq, grads.bq, state.first_moment.bq, state.second_moment.bq,
              false, config, bias1, bias2);
  adam_update(params.attention.bk, grads.bk, state.first_moment.bk, state.second_moment.bk,
              false, config, bias1, bias2);
  adam_update(params.attention.bv, grads.bv, state.first_moment.bv, state.second_moment.bv,
              false, config, bias1, bias2);
  adam_update(params.attention.bo, grads.bo, state.first_moment.bo, state.second_moment.bo,
              false, config, bias1, bias2);
  adam_update(params.mlp.b1, grads.b1, state.first_moment.b1, state.second_moment.b1, false,
              config, bias1, bias2);
  adam_update(params.mlp.b2, grads.b2, state.first_moment.b2, state.second_moment.b2, false,
              config, bias1, bias2);
}

TrainingRun train(const std::vector<Triplet>& triples, const EmbeddingLookup& lookup,
                  const ModelParams& init, const TrainingConfig& config,
                  const ValidationFn& validation) {
  validate_training(config);
  validate_model(init);
  if (triples.empty()) throw DataError("training set is empty");

  TrainingRun run;
  ModelParams params = init;
  AdamState state = AdamState::zeros_like(params);

  double best_map = -1.0;
  ModelParams best_params = params;
  int best_epoch = 0;

  std::vector<std::size_t> order(triples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();

    Rng shuffle_rng(derive_seed(config.seed, "train/epoch/" + std::to_string(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t offset = 0; offset < order.size();
         offset += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), offset + static_cast<std::size_t>(config.batch_size));
      std::vector<Triplet> batch;
      batch.reserve(end - offset);
      for (std::size_t i = offset; i < end; ++i) batch.push_back(triples[order[i]]);

      BatchResult result = batch_gradients(params, batch, lookup, config.loss_on, config.margin);
      if (!std::isfinite(result.mean_loss)) {
        std::string ids;
        for (const Triplet& t : batch) ids += " " + t.query_id;
        throw NumericError("non-finite batch loss at epoch " + std::to_string(epoch) +
                           "; batch queries:" + ids);
      }
      loss_sum += result.mean_loss * static_cast<double>(batch.size());
      adam_step(params, result.grads, state, config);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(triples.size());
    if (validation) {
      const auto [map, mrr] = validation(params);
      stats.val_map = map;
      stats.val_mrr = mrr;
      if (map > best_map) {
        best_map = map;
        best_params = params;
        best_epoch = epoch;
      }
    }
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    run.epochs.push_back(stats);
  }

  if (validation && config.epochs > 0) {
    run.final_params = best_params;
    run.best_epoch = best_epoch;
  } else {
    run.final_params = params;
    run.best_epoch = config.epochs;
  }
  return run;
}

void append_training_log(const TrainingRun& run, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write training log: " + path.string());
  for (const EpochStats& stats : run.epochs) {
    ordered_json object;
    object["epoch"] = stats.epoch;
    object["mean_loss"] = stats.mean_loss;
    object["val_map"] = stats.val_map;
    object["val_mrr"] = stats.val_mrr;
    object["seconds"] = stats.seconds;
    out << object.dump() << '\n';
  }
}

}  // namespace sectra
