#ifndef SECTRA_CONFIG_HPP_
#define SECTRA_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sectra/evaluator.hpp"
#include "sectra/split.hpp"
#include "sectra/trainer.hpp"

namespace sectra {

enum class CorpusFormat { jsonl, dblp_v1 };
enum class ProviderKind { hashed, file, http };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::hashed;
  int dimension = 768;
  std::uint64_t seed = 0;  // hashed provider
  std::string path;        // file provider store
  std::string endpoint;    // http provider
  std::string cache_path;  // http provider cache (defaults into the output dir)
  int batch_size = 16;
  int retries = 3;
};

struct ModelConfig {
  int dimension = 768;
  int heads = 4;
  double alpha = 0.3;
  int hidden = 0;  // 0 means dimension
};

// Defaults follow the published hyperparameters: alpha 0.3, 4 heads, margin 1,
// 4 epochs, batch size 3, learning rate 5e-5, weight decay 1e-4.
struct RunConfig {
  std::string corpus_path;
  CorpusFormat corpus_format = CorpusFormat::jsonl;
  std::string classifier = "heuristic";  // or "file"
  std::string labels_path;               // precomputed sentence labels (classifier=file)
  ProviderConfig provider;
  ModelConfig model;
  TrainingConfig training;
  SplitConfig split;
  RankSpace rank_on = RankSpace::h_paper;
  std::string output_dir;
  std::uint64_t seed = 0;

  void validate() const;
};

// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& object);
nlohmann::ordered_json config_to_json(const RunConfig& config);

// Applies a `--set key=value` override with a dotted path such as
// `model.alpha=0.5`. The value parses as JSON when possible, else as a string.
void apply_override(nlohmann::json& object, const std::string& assignment);

struct ConfigOverrides {
  std::vector<std::string> sets;  // key=value pairs
  bool has_seed = false;
  std::uint64_t seed = 0;
  std::string output_dir;  // flag override; beats SECTRA_DATA_DIR, beats config
};

RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides);

}  // namespace sectra

#endif  // SECTRA_CONFIG_HPP_
