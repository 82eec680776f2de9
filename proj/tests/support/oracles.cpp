#include "oracles.hpp"

#include <algorithm>
#include <cmath>

#include "sectra/errors.hpp"
#include "sectra/rng.hpp"

namespace sectra::testsupport {

namespace {

template <typename Scalar>
using Row = std::vector<Scalar>;

template <typename Scalar>
using Rows = std::vector<Row<Scalar>>;

template <typename Scalar>
Rows<Scalar> to_rows(const Eigen::MatrixXd& matrix) {
  Rows<Scalar> rows(static_cast<std::size_t>(matrix.rows()));
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    rows[static_cast<std::size_t>(r)].resize(static_cast<std::size_t>(matrix.cols()));
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
      rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
          static_cast<Scalar>(matrix(r, c));
    }
  }
  return rows;
}

template <typename Scalar>
Row<Scalar> to_row(const Eigen::VectorXd& vec) {
  Row<Scalar> out(static_cast<std::size_t>(vec.size()));
  for (Eigen::Index i = 0; i < vec.size(); ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<Scalar>(vec[i]);
  }
  return out;
}

// m * x + b with row-major m.
template <typename Scalar>
Row<Scalar> affine(const Rows<Scalar>& matrix, const Row<Scalar>& x, const Row<Scalar>& b) {
  Row<Scalar> out(matrix.size(), Scalar(0));
  for (std::size_t r = 0; r < matrix.size(); ++r) {
    Scalar sum = 0;
    for (std::size_t c = 0; c < x.size(); ++c) sum += matrix[r][c] * x[c];
    out[r] = sum + b[r];
  }
  return out;
}

template <typename Scalar>
struct AttentionResult {
  std::array<Row<Scalar>, 3> refined;
  std::vector<std::array<std::array<Scalar, 3>, 3>> head_weights;
};

template <typename Scalar>
AttentionResult<Scalar> run_attention(const ModelParams& params,
                                      const std::array<Row<Scalar>, 3>& sections) {
  const std::size_t d = static_cast<std::size_t>(params.dimension);
  const std::size_t heads = static_cast<std::size_t>(params.heads);
  const std::size_t head_size = d / heads;

  const Rows<Scalar> wq = to_rows<Scalar>(params.attention.wq);
  const Rows<Scalar> wk = to_rows<Scalar>(params.attention.wk);
  const Rows<Scalar> wv = to_rows<Scalar>(params.attention.wv);
  const Rows<Scalar> wo = to_rows<Scalar>(params.attention.wo);
  const Row<Scalar> bq = to_row<Scalar>(params.attention.bq);
  const Row<Scalar> bk = to_row<Scalar>(params.attention.bk);
  const Row<Scalar> bv = to_row<Scalar>(params.attention.bv);
  const Row<Scalar> bo = to_row<Scalar>(params.attention.bo);

  std::array<Row<Scalar>, 3> q, k, v;
  for (std::size_t i = 0; i < 3; ++i) {
    q[i] = affine(wq, sections[i], bq);
    k[i] = affine(wk, sections[i], bk);
    v[i] = affine(wv, sections[i], bv);
  }

  AttentionResult<Scalar> result;
  std::array<Row<Scalar>, 3> concat;
  for (std::size_t i = 0; i < 3; ++i) concat[i].assign(d, Scalar(0));

  const Scalar scale = Scalar(1) / std::sqrt(Scalar(head_size));
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t offset = h * head_size;
    std::array<std::array<Scalar, 3>, 3> weights{};
    for (std::size_t row = 0; row < 3; ++row) {
      std::array<Scalar, 3> scores{};
      for (std::size_t col = 0; col < 3; ++col) {
        Scalar dot = 0;
        for (std::size_t j = 0; j < head_size; ++j) dot += q[row][offset + j] * k[col][offset + j];
        scores[col] = dot * scale;
      }
      const Scalar row_max = std::max({scores[0], scores[1], scores[2]});
      Scalar denom = 0;
      std::array<Scalar, 3> exps{};
      for (std::size_t col = 0; col < 3; ++col) {
        exps[col] = std::exp(scores[col] - row_max);
        denom += exps[col];
      }
      for (std::size_t col = 0; col < 3; ++col) weights[row][col] = exps[col] / denom;
    }
    for (std::size_t row = 0; row < 3; ++row) {
      for (std::size_t j = 0; j < head_size; ++j) {
        Scalar sum = 0;
        for (std::size_t col = 0; col < 3; ++col) sum += weights[row][col] * v[col][offset + j];
        concat[row][offset + j] = sum;
      }
    }
    result.head_weights.push_back(weights);
  }

  for (std::size_t i = 0; i < 3; ++i) result.refined[i] = affine(wo, concat[i], bo);
  return result;
}

template <typename Scalar>
Row<Scalar> run_mlp(const ModelParams& params, const Row<Scalar>& input) {
  Row<Scalar> hidden = affine(to_rows<Scalar>(params.mlp.w1), input, to_row<Scalar>(params.mlp.b1));
  for (Scalar& h : hidden) h = h > Scalar(0) ? h : Scalar(0);
  return affine(to_rows<Scalar>(params.mlp.w2), hidden, to_row<Scalar>(params.mlp.b2));
}

template <typename Scalar>
Row<Scalar> run_loss_vector(const ModelParams& params, const SectionEmbeddings& paper,
                            LossSpace loss_on) {
  std::array<Row<Scalar>, 3> sections;
  for (std::size_t i = 0; i < 3; ++i) sections[i] = to_row<Scalar>(paper.sections[i]);
  const AttentionResult<Scalar> attention = run_attention<Scalar>(params, sections);

  const std::size_t d = static_cast<std::size_t>(params.dimension);
  const Row<Scalar> abstract_vec = to_row<Scalar>(paper.abstract_vec);
  const Scalar alpha = static_cast<Scalar>(params.alpha);
  Row<Scalar> h_paper(d);
  for (std::size_t j = 0; j < d; ++j) {
    const Scalar mean =
        (attention.refined[0][j] + attention.refined[1][j] + attention.refined[2][j]) / Scalar(3);
    h_paper[j] = alpha * mean + (Scalar(1) - alpha) * abstract_vec[j];
  }
  if (loss_on == LossSpace::h_paper) return h_paper;
  return run_mlp<Scalar>(params, h_paper);
}

template <typename Scalar>
Scalar distance(const Row<Scalar>& u, const Row<Scalar>& v) {
  Scalar sum = 0;
  for (std::size_t i = 0; i < u.size(); ++i) sum += (u[i] - v[i]) * (u[i] - v[i]);
  return std::sqrt(sum);
}

}  // namespace

AttentionOracleResult attention_oracle(const ModelParams& params,
                                       const std::array<Flat, 3>& sections) {
  const AttentionResult<double> result = run_attention<double>(params, sections);
  AttentionOracleResult out;
  out.refined = result.refined;
  out.head_weights = result.head_weights;
  return out;
}

Flat mlp_oracle(const ModelParams& params, const Flat& input) {
  return run_mlp<double>(params, input);
}

long double triplet_loss_oracle(const ModelParams& params,
                                const std::array<SectionEmbeddings, 3>& papers,
                                LossSpace loss_on, double margin) {
  const Row<long double> anchor = run_loss_vector<long double>(params, papers[0], loss_on);
  const Row<long double> positive = run_loss_vector<long double>(params, papers[1], loss_on);
  const Row<long double> negative = run_loss_vector<long double>(params, papers[2], loss_on);
  const long double violation = distance(anchor, positive) - distance(anchor, negative) +
                                static_cast<long double>(margin);
  return violation > 0 ? violation : 0;
}

double brute_average_precision(const std::vector<std::string>& ranked_ids,
                               const std::set<std::string>& relevant) {
  double sum = 0.0;
  for (std::size_t k = 1; k <= ranked_ids.size(); ++k) {
    if (relevant.count(ranked_ids[k - 1]) == 0) continue;
    std::size_t hits = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (relevant.count(ranked_ids[j]) != 0) ++hits;
    }
    sum += static_cast<double>(hits) / static_cast<double>(k);
  }
  return sum / static_cast<double>(relevant.size());
}

double brute_reciprocal_rank(const std::vector<std::string>& ranked_ids,
                             const std::set<std::string>& relevant) {
  for (std::size_t k = 0; k < ranked_ids.size(); ++k) {
    if (relevant.count(ranked_ids[k]) != 0) return 1.0 / static_cast<double>(k + 1);
  }
  return 0.0;
}

double brute_precision_at(const std::vector<std::string>& ranked_ids,
                          const std::set<std::string>& relevant, int n) {
  std::size_t hits = 0;
  for (std::size_t k = 0; k < ranked_ids.size() && k < static_cast<std::size_t>(n); ++k) {
    if (relevant.count(ranked_ids[k]) != 0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

double brute_recall_at(const std::vector<std::string>& ranked_ids,
                       const std::set<std::string>& relevant, int n) {
  std::size_t hits = 0;
  for (std::size_t k = 0; k < ranked_ids.size() && k < static_cast<std::size_t>(n); ++k) {
    if (relevant.count(ranked_ids[k]) != 0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double brute_f1_at(const std::vector<std::string>& ranked_ids,
                   const std::set<std::string>& relevant, int n) {
  const double precision = brute_precision_at(ranked_ids, relevant, n);
  const double recall = brute_recall_at(ranked_ids, relevant, n);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

std::vector<std::string> brute_rank(std::vector<std::pair<std::string, double>> scored) {
  std::vector<std::string> out;
  while (!scored.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scored.size(); ++i) {
      if (scored[i].second > scored[best].second ||
          (scored[i].second == scored[best].second && scored[i].first < scored[best].first)) {
        best = i;
      }
    }
    out.push_back(scored[best].first);
    scored.erase(scored.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return out;
}

namespace {

void for_each_coefficient(ModelParams& params, ModelGrads& grads,
                          const std::function<void(double& value, double& grad_slot)>& visit) {
  auto walk_matrix = [&](Eigen::MatrixXd& m, Eigen::MatrixXd& g) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) visit(m(r, c), g(r, c));
    }
  };
  auto walk_vector = [&](Eigen::VectorXd& v, Eigen::VectorXd& g) {
    for (Eigen::Index i = 0; i < v.size(); ++i) visit(v[i], g[i]);
  };
  walk_matrix(params.attention.wq, grads.wq);
  walk_matrix(params.attention.wk, grads.wk);
  walk_matrix(params.attention.wv, grads.wv);
  walk_matrix(params.attention.wo, grads.wo);
  walk_vector(params.attention.bq, grads.bq);
  walk_vector(params.attention.bk, grads.bk);
  walk_vector(params.attention.bv, grads.bv);
  walk_vector(params.attention.bo, grads.bo);
  walk_matrix(params.mlp.w1, grads.w1);
  walk_vector(params.mlp.b1, grads.b1);
  walk_matrix(params.mlp.w2, grads.w2);
  walk_vector(params.mlp.b2, grads.b2);
}

}  // namespace

ModelGrads finite_difference_gradients(
    const ModelParams& params, const std::function<long double(const ModelParams&)>& loss,
    double step) {
  ModelParams work = params;
  ModelGrads numeric = ModelGrads::zeros_like(params);
  for_each_coefficient(work, numeric, [&](double& value, double& grad_slot) {
    const double original = value;
    const double h = step * std::max(1.0, std::abs(original));
    value = original + h;
    const long double up = loss(work);
    value = original - h;
    const long double down = loss(work);
    value = original;
    grad_slot = static_cast<double>((up - down) / (2.0L * static_cast<long double>(h)));
  });
  return numeric;
}

GradientCheckDraw make_gradient_draw(std::uint64_t seed, LossSpace loss_on, int dimension,
                                     int heads, int hidden) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(derive_seed(seed + 7919 * attempt, "gradient-draw"));
    GradientCheckDraw draw;
    draw.params = init_model(dimension, heads, hidden, 0.3, rng.next());
    for (SectionEmbeddings& paper : draw.papers) {
      for (Vector* vec : {&paper.sections[0], &paper.sections[1], &paper.sections[2],
                          &paper.abstract_vec}) {
        vec->resize(dimension);
        for (int i = 0; i < dimension; ++i) (*vec)[i] = rng.uniform(-1.0, 1.0);
        *vec /= vec->norm();
      }
    }

    std::array<PaperRepresentation, 3> reprs;
    for (std::size_t i = 0; i < 3; ++i) {
      reprs[i] = represent_from_embeddings(draw.papers[i], draw.params);
    }
    auto loss_vec = [&](std::size_t i) -> const Vector& {
      return loss_on == LossSpace::z_paper ? reprs[i].z_paper : reprs[i].h_paper;
    };
    const double dist_positive = (loss_vec(0) - loss_vec(1)).norm();
    const double dist_negative = (loss_vec(0) - loss_vec(2)).norm();
    const double violation = dist_positive - dist_negative + 1.0;
    if (violation < 0.05 || dist_positive < 0.05 || dist_negative < 0.05) continue;

    if (loss_on == LossSpace::z_paper) {
      double min_pre_relu = 1.0;
      for (std::size_t i = 0; i < 3; ++i) {
        const Vector pre_relu = draw.params.mlp.w1 * reprs[i].h_paper + draw.params.mlp.b1;
        min_pre_relu = std::min(min_pre_relu, pre_relu.cwiseAbs().minCoeff());
      }
      if (min_pre_relu < 1e-3) continue;
    }
    return draw;
  }
}

double gradient_check_error(const GradientCheckDraw& draw, LossSpace loss_on, double margin) {
  const std::array<std::string, 3> ids = {"anchor", "positive", "negative"};
  EmbeddingLookup lookup = [&](const std::string& id) -> const SectionEmbeddings& {
    for (std::size_t i = 0; i < 3; ++i) {
      if (ids[i] == id) return draw.papers[i];
    }
    throw DataError("unknown gradient-check paper " + id);
  };
  const std::vector<Triplet> batch = {{ids[0], ids[1], ids[2], NegativeKind::random}};
  const BatchResult analytic = batch_gradients(draw.params, batch, lookup, loss_on, margin);

  const ModelGrads numeric = finite_difference_gradients(
      draw.params,
      [&](const ModelParams& perturbed) {
        return triplet_loss_oracle(perturbed, draw.papers, loss_on, margin);
      },
      1e-5);
  return max_relative_error(analytic.grads, numeric, 1e-8);
}

double max_relative_error(const ModelGrads& analytic, const ModelGrads& numeric, double floor) {
  double worst = 0.0;
  auto compare_matrix = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      for (Eigen::Index c = 0; c < a.cols(); ++c) {
        const double denom = std::max({std::abs(a(r, c)), std::abs(b(r, c)), floor});
        worst = std::max(worst, std::abs(a(r, c) - b(r, c)) / denom);
      }
    }
  };
  auto compare_vector = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
      worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
  };
  compare_matrix(analytic.wq, numeric.wq);
  compare_matrix(analytic.wk, numeric.wk);
  compare_matrix(analytic.wv, numeric.wv);
  compare_matrix(analytic.wo, numeric.wo);
  compare_vector(analytic.bq, numeric.bq);
  compare_vector(analytic.bk, numeric.bk);
  compare_vector(analytic.bv, numeric.bv);
  compare_vector(analytic.bo, numeric.bo);
  compare_matrix(analytic.w1, numeric.w1);
  compare_vector(analytic.b1, numeric.b1);
  compare_matrix(analytic.w2, numeric.w2);
  compare_vector(analytic.b2, numeric.b2);
  return worst;
}

}  // namespace sectra::testsupport
