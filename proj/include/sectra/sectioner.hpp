#ifndef SECTRA_SECTIONER_HPP_
#define SECTRA_SECTIONER_HPP_

#include <array>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace sectra {

enum class SectionLabel : int {
  background = 0,
  method = 1,
  results = 2,
  objective = 3,
  other = 4,
};

inline constexpr std::size_t kCategoryCount = 5;
inline constexpr std::array<SectionLabel, 3> kKeptSections = {
    SectionLabel::background, SectionLabel::method, SectionLabel::results};

const char* section_label_name(SectionLabel label);

struct SentenceClassification {
  std::string sentence;
  std::array<double, kCategoryCount> probabilities{};

  // Argmax with ties broken toward the lowest category index.
  SectionLabel label() const;
};

struct SectionedAbstract {
  std::vector<std::string> background;
  std::vector<std::string> method;
  std::vector<std::string> results;
  std::vector<std::string> residual;  // objective + other, order preserved

  const std::vector<std::string>& section(SectionLabel label) const;
  std::size_t sentence_count() const {
    return background.size() + method.size() + results.size() + residual.size();
  }
};

// Splits at `.`, `!`, `?` followed by whitespace and an uppercase letter (or
// end of text); common abbreviations such as "e.g." or "Fig." do not split.
// Joining the result with single spaces reproduces the input's word sequence.
std::vector<std::string> split_sentences(const std::string& abstract);

class SentenceClassifier {
 public:
  virtual ~SentenceClassifier() = default;
  virtual std::array<double, kCategoryCount> probabilities(const std::string& sentence) const = 0;
  virtual std::string name() const = 0;
};

// Deterministic cue-phrase scorer: "we propose" -> method, "results show" ->
// results, scene-setting text defaults to background. Probabilities are
// normalized scores.
class HeuristicClassifier final : public SentenceClassifier {
 public:
  std::array<double, kCategoryCount> probabilities(const std::string& sentence) const override;
  std::string name() const override { return "heuristic/v1"; }
};

SentenceClassification classify_sentence(const SentenceClassifier& classifier,
                                         const std::string& sentence);

SectionedAbstract assemble(const std::vector<SentenceClassification>& classified);

// Title-prefixed section text. Empty sections fall back to the title alone.
std::string section_text(const SectionedAbstract& sectioned, SectionLabel label,
                         const std::string& title, const std::string& separator = " ");

// Optional externally computed sentence labels, keyed by paper id:
// JSONL `{"id", "labels": [[5 floats] per sentence]}`.
class PrecomputedLabels {
 public:
  static PrecomputedLabels load(const std::filesystem::path& path);
  const std::vector<std::array<double, kCategoryCount>>* find(const std::string& id) const;
  std::size_t size() const { return labels_.size(); }

 private:
  std::unordered_map<std::string, std::vector<std::array<double, kCategoryCount>>> labels_;
};

// Front door used by the pipeline: splits, classifies (or applies precomputed
// labels), and assembles. Pure per call; safe to share across threads.
class PaperSectioner {
 public:
  explicit PaperSectioner(std::shared_ptr<const SentenceClassifier> classifier);
  PaperSectioner(std::shared_ptr<const SentenceClassifier> classifier, PrecomputedLabels labels);

  SectionedAbstract section(const std::string& paper_id, const std::string& abstract) const;
  std::string classifier_name() const;

 private:
  std::shared_ptr<const SentenceClassifier> classifier_;
  PrecomputedLabels labels_;
  bool use_labels_ = false;
};

}  // namespace sectra

#endif  // SECTRA_SECTIONER_HPP_
