#include "sectra/model.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sectra/errors.hpp"
#include "sectra/rng.hpp"

namespace sectra {

using ordered_json = nlohmann::ordered_json;

namespace {

void glorot_fill(Eigen::MatrixXd& matrix, Rng& rng) {
  const double fan_in = static_cast<double>(matrix.cols());
  const double fan_out = static_cast<double>(matrix.rows());
  const double scale = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
      matrix(r, c) = rng.uniform(-scale, scale);
    }
  }
}

}  // namespace

ModelParams init_model(int dimension, int heads, int hidden, double alpha, std::uint64_t seed) {
  if (hidden <= 0) hidden = dimension;

  ModelParams params;
  params.dimension = dimension;
  params.heads = heads;
  params.alpha = alpha;
  params.init_seed = seed;

  params.attention.heads = heads;
  params.attention.wq.resize(dimension, dimension);
  params.attention.wk.resize(dimension, dimension);
  params.attention.wv.resize(dimension, dimension);
  params.attention.wo.resize(dimension, dimension);
  params.attention.bq = Eigen::VectorXd::Zero(dimension);
  params.attention.bk = Eigen::VectorXd::Zero(dimension);
  params.attention.bv = Eigen::VectorXd::Zero(dimension);
  params.attention.bo = Eigen::VectorXd::Zero(dimension);
  params.mlp.w1.resize(hidden, dimension);
  params.mlp.b1 = Eigen::VectorXd::Zero(hidden);
  params.mlp.w2.resize(dimension, hidden);
  params.mlp.b2 = Eigen::VectorXd::Zero(dimension);

  Rng rng(derive_seed(seed, "model/init"));
  glorot_fill(params.attention.wq, rng);
  glorot_fill(params.attention.wk, rng);
  glorot_fill(params.attention.wv, rng);
  glorot_fill(params.attention.wo, rng);
  glorot_fill(params.mlp.w1, rng);
  glorot_fill(params.mlp.w2, rng);

  validate_model(params);
  return params;
}

void validate_model(const ModelParams& params) {
  if (params.dimension < 1) throw UsageError("model dimension must be >= 1");
  if (params.heads < 1) throw UsageError("attention head count must be >= 1");
  if (params.dimension % params.heads != 0) {
    throw UsageError("model dimension " + std::to_string(params.dimension) +
                     " is not divisible by head count " + std::to_string(params.heads));
  }
  if (params.alpha < 0.0 || params.alpha > 1.0) {
    throw UsageError("alpha must lie in [0, 1]");
  }
  const int d = params.dimension;
  const auto& a = params.attention;
  if (a.wq.rows() != d || a.wq.cols() != d || a.wk.rows() != d || a.wk.cols() != d ||
      a.wv.rows() != d || a.wv.cols() != d || a.wo.rows() != d || a.wo.cols() != d ||
      a.bq.size() != d || a.bk.size() != d || a.bv.size() != d || a.bo.size() != d) {
    throw DataError("attention parameter shapes do not match model dimension");
  }
  const auto& m = params.mlp;
  if (m.w1.cols() != d || m.b1.size() != m.w1.rows() || m.w2.cols() != m.w1.rows() ||
      m.b2.size() != m.w2.rows()) {
    throw DataError("mlp parameter shapes are inconsistent");
  }
}

AttentionOutput attend(const AttentionParams& params, const std::array<Vector, 3>& sections) {
  const int d = params.dimension();
  for (const Vector& section : sections) {
    if (section.size() != d) {
      throw DataError("attention input dimension " + std::to_string(section.size()) +
                      " does not match parameter dimension " + std::to_string(d));
    }
  }
  if (params.heads < 1 || d % params.heads != 0) {
    throw DataError("attention dimension is not divisible by head count");
  }
  const int head_size = d / params.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_size));

  Eigen::MatrixXd input(3, d);
  for (int i = 0; i < 3; ++i) input.row(i) = sections[static_cast<std::size_t>(i)].transpose();

  Eigen::MatrixXd q = input * params.wq.transpose();
  Eigen::MatrixXd k = input * params.wk.transpose();
  Eigen::MatrixXd v = input * params.wv.transpose();
  q.rowwise() += params.bq.transpose();
  k.rowwise() += params.bk.transpose();
  v.rowwise() += params.bv.transpose();

  AttentionOutput output;
  Eigen::MatrixXd concat(3, d);
  for (int h = 0; h < params.heads; ++h) {
    const auto qh = q.middleCols(h * head_size, head_size);
    const auto kh = k.middleCols(h * head_size, head_size);
    const auto vh = v.middleCols(h * head_size, head_size);

    Eigen::Matrix3d scores = (qh * kh.transpose()) * scale;
    Eigen::Matrix3d weights;
    for (int row = 0; row < 3; ++row) {
      const double row_max = scores.row(row).maxCoeff();
      Eigen::Vector3d exps = (scores.row(row).transpose().array() - row_max).exp();
      weights.row(row) = (exps / exps.sum()).transpose();
    }
    concat.middleCols(h * head_size, head_size) = weights * vh;
    output.head_weights.push_back(weights);
  }

  Eigen::MatrixXd refined = concat * params.wo.transpose();
  refined.rowwise() += params.bo.transpose();
  for (int i = 0; i < 3; ++i) {
    output.refined[static_cast<std::size_t>(i)] = refined.row(i).transpose();
  }
  return output;
}

Vector aggregate_sections(const std::array<Vector, 3>& refined) {
  if (refined[0].size() != refined[1].size() || refined[0].size() != refined[2].size()) {
    throw DataError("section vectors must share a dimension");
  }
  return (refined[0] + refined[1] + refined[2]) / 3.0;
}

Vector combine(const Vector& h_sections, const Vector& h_abstract, double alpha) {
  if (h_sections.size() != h_abstract.size()) {
    throw DataError("combine expects equal dimensions");
  }
  if (alpha < 0.0 || alpha > 1.0) throw UsageError("alpha must lie in [0, 1]");
  return alpha * h_sections + (1.0 - alpha) * h_abstract;
}

Vector mlp_project(const MlpParams& params, const Vector& h_paper) {
  if (h_paper.size() != params.w1.cols()) {
    throw DataError("mlp input dimension does not match parameters");
  }
  const Vector hidden = ((params.w1 * h_paper + params.b1).array().max(0.0)).matrix();
  return params.w2 * hidden + params.b2;
}

std::array<double, 3> section_weight_report(const std::vector<Eigen::Matrix3d>& head_weights) {
  if (head_weights.empty()) throw DataError("section weights need at least one head");
  std::array<double, 3> weights{};
  for (const Eigen::Matrix3d& matrix : head_weights) {
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) {
        weights[static_cast<std::size_t>(col)] += matrix(row, col);
      }
    }
  }
  const double total = 3.0 * static_cast<double>(head_weights.size());
  for (double& w : weights) w /= total;
  return weights;
}

PaperTexts paper_texts(const PaperRecord& paper, const PaperSectioner& sectioner,
                       const std::string& separator) {
  const SectionedAbstract sectioned = sectioner.section(paper.id, paper.abstract);
  PaperTexts texts;
  texts.background = section_text(sectioned, SectionLabel::background, paper.title, separator);
  texts.method = section_text(sectioned, SectionLabel::method, paper.title, separator);
  texts.results = section_text(sectioned, SectionLabel::results, paper.title, separator);
  texts.abstract_text = paper.abstract;
  return texts;
}

SectionEmbeddings embed_paper(const PaperRecord& paper, EmbeddingProvider& provider,
                              const PaperSectioner& sectioner, const std::string& separator) {
  const PaperTexts texts = paper_texts(paper, sectioner, separator);
  SectionEmbeddings base;
  base.sections[0] = provider.embed(texts.background);
  base.sections[1] = provider.embed(texts.method);
  base.sections[2] = provider.embed(texts.results);
  base.abstract_vec = provider.embed(texts.abstract_text);
  return base;
}

PaperRepresentation represent_from_embeddings(const SectionEmbeddings& base,
                                              const ModelParams& params) {
  PaperRepresentation repr;
  repr.h_background = base.sections[0];
  repr.h_method = base.sections[1];
  repr.h_results = base.sections[2];
  repr.h_abstract = base.abstract_vec;

  const AttentionOutput attention = attend(params.attention, base.sections);
  repr.h_sections = aggregate_sections(attention.refined);
  repr.h_paper = combine(repr.h_sections, repr.h_abstract, params.alpha);
  repr.z_paper = mlp_project(params.mlp, repr.h_paper);
  repr.section_weights = section_weight_report(attention.head_weights);
  return repr;
}

PaperRepresentation represent(const PaperRecord& paper, EmbeddingProvider& provider,
                              const PaperSectioner& sectioner, const ModelParams& params) {
  if (paper.title.empty()) throw DataError("paper " + paper.id + " has an empty title");
  return represent_from_embeddings(embed_paper(paper, provider, sectioner), params);
}

PaperEmbeddingIndex::PaperEmbeddingIndex(const Corpus& corpus, EmbeddingProvider& provider,
                                         const PaperSectioner& sectioner)
    : corpus_(&corpus), provider_(&provider), sectioner_(&sectioner) {}

const SectionEmbeddings& PaperEmbeddingIndex::embeddings(const std::string& id) {
  auto it = memo_.find(id);
  if (it != memo_.end()) return it->second;
  const PaperRecord& paper = corpus_->at(id);
  return memo_.emplace(id, embed_paper(paper, *provider_, *sectioner_)).first->second;
}

const std::array<Vector, 3>& PaperEmbeddingIndex::raw_section_embeddings(const std::string& id) {
  auto it = raw_memo_.find(id);
  if (it != raw_memo_.end()) return it->second;

  const PaperRecord& paper = corpus_->at(id);
  const SectionedAbstract sectioned = sectioner_->section(paper.id, paper.abstract);
  std::array<Vector, 3> vectors;
  for (std::size_t i = 0; i < kKeptSections.size(); ++i) {
    const std::vector<std::string>& sentences = sectioned.section(kKeptSections[i]);
    std::string body;
    for (const std::string& sentence : sentences) {
      if (!body.empty()) body += ' ';
      body += sentence;
    }
    vectors[i] = provider_->embed(body);
  }
  return raw_memo_.emplace(id, std::move(vectors)).first->second;
}

namespace {

ordered_json matrix_to_json(const Eigen::MatrixXd& matrix) {
  ordered_json values = ordered_json::array();
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) values.push_back(matrix(r, c));
  }
  return values;
}

ordered_json vector_to_json(const Eigen::VectorXd& vec) {
  ordered_json values = ordered_json::array();
  for (Eigen::Index i = 0; i < vec.size(); ++i) values.push_back(vec[i]);
  return values;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& values, Eigen::Index rows,
                                 Eigen::Index cols, const std::string& name) {
  if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
    throw DataError("checkpoint matrix " + name + " has " + std::to_string(values.size()) +
                    " entries, expected " + std::to_string(rows * cols));
  }
  Eigen::MatrixXd matrix(rows, cols);
  Eigen::Index index = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) matrix(r, c) = values[index++].get<double>();
  }
  return matrix;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& values, Eigen::Index size,
                                 const std::string& name) {
  if (static_cast<Eigen::Index>(values.size()) != size) {
    throw DataError("checkpoint vector " + name + " has " + std::to_string(values.size()) +
                    " entries, expected " + std::to_string(size));
  }
  Eigen::VectorXd vec(size);
  for (Eigen::Index i = 0; i < size; ++i) vec[i] = values[i].get<double>();
  return vec;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  ordered_json object;
  object["format_version"] = 1;
  object["dimension"] = params.dimension;
  object["heads"] = params.heads;
  object["alpha"] = params.alpha;
  object["hidden"] = params.mlp.hidden();
  object["init_seed"] = params.init_seed;

  ordered_json matrices;
  matrices["wq"] = matrix_to_json(params.attention.wq);
  matrices["wk"] = matrix_to_json(params.attention.wk);
  matrices["wv"] = matrix_to_json(params.attention.wv);
  matrices["wo"] = matrix_to_json(params.attention.wo);
  matrices["bq"] = vector_to_json(params.attention.bq);
  matrices["bk"] = vector_to_json(params.attention.bk);
  matrices["bv"] = vector_to_json(params.attention.bv);
  matrices["bo"] = vector_to_json(params.attention.bo);
  matrices["w1"] = matrix_to_json(params.mlp.w1);
  matrices["b1"] = vector_to_json(params.mlp.b1);
  matrices["w2"] = matrix_to_json(params.mlp.w2);
  matrices["b2"] = vector_to_json(params.mlp.b2);
  object["matrices"] = std::move(matrices);

  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out << object.dump() << '\n';
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read checkpoint: " + path.string());
  nlohmann::json object = nlohmann::json::parse(in, nullptr, false);
  if (object.is_discarded()) throw DataError("malformed checkpoint: " + path.string());

  const int format_version = object.at("format_version").get<int>();
  if (format_version != 1) {
    throw DataError("unsupported checkpoint format version " + std::to_string(format_version));
  }

  ModelParams params;
  params.dimension = object.at("dimension").get<int>();
  params.heads = object.at("heads").get<int>();
  params.alpha = object.at("alpha").get<double>();
  params.init_seed = object.at("init_seed").get<std::uint64_t>();
  const int hidden = object.at("hidden").get<int>();
  const int d = params.dimension;

  const auto& matrices = object.at("matrices");
  params.attention.heads = params.heads;
  params.attention.wq = matrix_from_json(matrices.at("wq"), d, d, "wq");
  params.attention.wk = matrix_from_json(matrices.at("wk"), d, d, "wk");
  params.attention.wv = matrix_from_json(matrices.at("wv"), d, d, "wv");
  params.attention.wo = matrix_from_json(matrices.at("wo"), d, d, "wo");
  params.attention.bq = vector_from_json(matrices.at("bq"), d, "bq");
  params.attention.bk = vector_from_json(matrices.at("bk"), d, "bk");
  params.attention.bv = vector_from_json(matrices.at("bv"), d, "bv");
  params.attention.bo = vector_from_json(matrices.at("bo"), d, "bo");
  params.mlp.w1 = matrix_from_json(matrices.at("w1"), hidden, d, "w1");
  params.mlp.b1 = vector_from_json(matrices.at("b1"), hidden, "b1");
  params.mlp.w2 = matrix_from_json(matrices.at("w2"), d, hidden, "w2");
  params.mlp.b2 = vector_from_json(matrices.at("b2"), d, "b2");

  validate_model(params);
  return params;
}

}  // namespace sectra
