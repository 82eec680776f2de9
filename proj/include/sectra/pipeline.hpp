#ifndef SECTRA_PIPELINE_HPP_
#define SECTRA_PIPELINE_HPP_

#include <filesystem>
#include <iosfwd>
#include <string>

#include "sectra/config.hpp"

namespace sectra {

// Every command reads and writes inside the run's output directory.
struct OutputPaths {
  std::filesystem::path root;

  std::filesystem::path corpus() const { return root / "corpus.jsonl"; }
  std::filesystem::path ingest_report() const { return root / "ingest_report.json"; }
  std::filesystem::path split() const { return root / "split.json"; }
  std::filesystem::path embeddings() const { return root / "embeddings.jsonl"; }
  std::filesystem::path checkpoint() const { return root / "checkpoint.json"; }
  std::filesystem::path training_log() const { return root / "training_log.jsonl"; }
  std::filesystem::path metrics() const { return root / "metrics_report.json"; }
  std::filesystem::path per_n_csv() const { return root / "per_n_metrics.csv"; }
  std::filesystem::path ablation_csv() const { return root / "ablation.csv"; }
  std::filesystem::path ablation_json() const { return root / "ablation.json"; }
  std::filesystem::path alpha_csv() const { return root / "alpha_sweep.csv"; }
  std::filesystem::path alpha_json() const { return root / "alpha_sweep.json"; }
  std::filesystem::path repr_csv() const { return root / "repr_study.csv"; }
  std::filesystem::path repr_json() const { return root / "repr_study.json"; }
  std::filesystem::path repr_checkpoint(const std::string& label) const {
    return root / ("checkpoint_" + label + ".json");
  }
  std::filesystem::path resolved_config() const { return root / "resolved_config.json"; }
  std::filesystem::path lock() const { return root / ".sectra.lock"; }
};

// One command process at a time per output directory.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& path);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

void cmd_ingest(const RunConfig& config);
void cmd_split(const RunConfig& config);
void cmd_embed(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_eval(const RunConfig& config);
void cmd_ablate(const RunConfig& config);
void cmd_alpha_sweep(const RunConfig& config);
void cmd_repr_study(const RunConfig& config);

struct RecommendOptions {
  std::string query_id;    // a corpus paper, or
  std::string query_json;  // an ad-hoc `{"title", "abstract"}` query
  int top_k = 10;
  bool as_json = false;
};

void cmd_recommend(const RunConfig& config, const RecommendOptions& options, std::ostream& out);

}  // namespace sectra

#endif  // SECTRA_PIPELINE_HPP_
