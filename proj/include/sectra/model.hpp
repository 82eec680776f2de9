#ifndef SECTRA_MODEL_HPP_
#define SECTRA_MODEL_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "sectra/corpus.hpp"
#include "sectra/embedder.hpp"
#include "sectra/sectioner.hpp"

namespace sectra {

// Projection weights act on column vectors: q = wq * x + bq. Head h owns
// rows [h*d/H, (h+1)*d/H) of each projection.
struct AttentionParams {
  Eigen::MatrixXd wq, wk, wv, wo;  // d x d
  Eigen::VectorXd bq, bk, bv, bo;  // d
  int heads = 4;

  int dimension() const { return static_cast<int>(wq.rows()); }
};

struct MlpParams {
  Eigen::MatrixXd w1;  // hidden x d
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd w2;  // out x hidden
  Eigen::VectorXd b2;  // out

  int hidden() const { return static_cast<int>(w1.rows()); }
};

struct ModelParams {
  int dimension = 768;
  int heads = 4;
  double alpha = 0.3;
  std::uint64_t init_seed = 0;
  AttentionParams attention;
  MlpParams mlp;
};

// Glorot-uniform matrices, zero biases, filled in a fixed order from the seed.
ModelParams init_model(int dimension, int heads, int hidden, double alpha, std::uint64_t seed);

void validate_model(const ModelParams& params);

struct AttentionOutput {
  std::array<Vector, 3> refined;             // background, method, results order
  std::vector<Eigen::Matrix3d> head_weights;  // row-stochastic per head
};

// Scaled dot-product multi-head self-attention over the three stacked section
// vectors. No positional encoding, no masking, no dropout.
AttentionOutput attend(const AttentionParams& params, const std::array<Vector, 3>& sections);

// Componentwise mean in the fixed order (background + method + results) / 3.
Vector aggregate_sections(const std::array<Vector, 3>& refined);

// alpha * h_sections + (1 - alpha) * h_abstract.
Vector combine(const Vector& h_sections, const Vector& h_abstract, double alpha);

// w2 * relu(w1 * h + b1) + b2.
Vector mlp_project(const MlpParams& params, const Vector& h_paper);

// Per-section weight: mean attention mass on that section's column across
// heads and query rows. Always a probability vector over the three sections.
std::array<double, 3> section_weight_report(const std::vector<Eigen::Matrix3d>& head_weights);

struct PaperRepresentation {
  Vector h_background, h_method, h_results;  // title-prefixed section embeddings
  Vector h_sections;                         // attention output, averaged
  Vector h_abstract;                         // whole-abstract embedding
  Vector h_paper;                            // alpha combination; ranking vector
  Vector z_paper;                            // MLP projection; loss vector
  std::array<double, 3> section_weights{};
};

// The four embedding inputs of one paper.
struct SectionEmbeddings {
  std::array<Vector, 3> sections;  // title-prefixed background/method/results
  Vector abstract_vec;
};

struct PaperTexts {
  std::string background;
  std::string method;
  std::string results;
  std::string abstract_text;
};

PaperTexts paper_texts(const PaperRecord& paper, const PaperSectioner& sectioner,
                       const std::string& separator = " ");

SectionEmbeddings embed_paper(const PaperRecord& paper, EmbeddingProvider& provider,
                              const PaperSectioner& sectioner,
                              const std::string& separator = " ");

PaperRepresentation represent_from_embeddings(const SectionEmbeddings& base,
                                              const ModelParams& params);

// Full pipeline for one paper: section, embed the four texts, attend,
// aggregate, combine, project.
PaperRepresentation represent(const PaperRecord& paper, EmbeddingProvider& provider,
                              const PaperSectioner& sectioner, const ModelParams& params);

// Checkpoint files: JSON with dimensions, alpha, seeds, and row-major arrays.
// load(save(p)) == p exactly.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

// Sections and embeds papers on demand and memoizes the results, so training
// and evaluation compute each paper's four embeddings exactly once.
class PaperEmbeddingIndex {
 public:
  PaperEmbeddingIndex(const Corpus& corpus, EmbeddingProvider& provider,
                      const PaperSectioner& sectioner);

  const SectionEmbeddings& embeddings(const std::string& id);
  // Bare section texts without the title, for the ablation's raw pattern.
  // An empty section embeds the empty string (zero vector under hashing).
  const std::array<Vector, 3>& raw_section_embeddings(const std::string& id);

  const Corpus& corpus() const { return *corpus_; }
  EmbeddingProvider& provider() { return *provider_; }
  const PaperSectioner& sectioner() const { return *sectioner_; }

 private:
  const Corpus* corpus_;
  EmbeddingProvider* provider_;
  const PaperSectioner* sectioner_;
  std::unordered_map<std::string, SectionEmbeddings> memo_;
  std::unordered_map<std::string, std::array<Vector, 3>> raw_memo_;
};

}  // namespace sectra

#endif  // SECTRA_MODEL_HPP_
