#include "sectra/sectioner.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "sectra/errors.hpp"

namespace sectra {

const char* section_label_name(SectionLabel label) {
  switch (label) {
    case SectionLabel::background: return "background";
    case SectionLabel::method: return "method";
    case SectionLabel::results: return "results";
    case SectionLabel::objective: return "objective";
    case SectionLabel::other: return "other";
  }
  return "other";
}

SectionLabel SentenceClassification::label() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < kCategoryCount; ++i) {
    if (probabilities[i] > probabilities[best]) best = i;
  }
  return static_cast<SectionLabel>(best);
}

const std::vector<std::string>& SectionedAbstract::section(SectionLabel label) const {
  switch (label) {
    case SectionLabel::background: return background;
    case SectionLabel::method: return method;
    case SectionLabel::results: return results;
    default: return residual;
  }
}

namespace {

bool is_sentence_punct(char c) { return c == '.' || c == '!' || c == '?'; }

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// The trailing word including its punctuation run, e.g. "al." in "et al.".
bool ends_with_abbreviation(std::string_view text) {
  static const std::set<std::string> kAbbreviations = {
      "e.g.", "i.e.",  "etc.", "cf.",  "vs.", "viz.", "al.",  "fig.", "figs.",
      "eq.",  "eqs.",  "sec.", "no.",  "ca.", "vol.", "resp.", "approx.",
      "dr.",  "prof.", "mr.",  "mrs.", "ms.", "st."};
  std::size_t start = text.size();
  while (start > 0 && !std::isspace(static_cast<unsigned char>(text[start - 1]))) --start;
  return kAbbreviations.count(lowercase(text.substr(start))) != 0;
}

std::string trimmed(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

}  // namespace

std::vector<std::string> split_sentences(const std::string& abstract) {
  std::vector<std::string> sentences;
  const std::size_t n = abstract.size();
  std::size_t start = 0;
  std::size_t i = 0;

  auto emit = [&](std::size_t end) {
    std::string sentence = trimmed(std::string_view(abstract).substr(start, end - start));
    if (!sentence.empty()) sentences.push_back(std::move(sentence));
  };

  while (i < n) {
    if (!is_sentence_punct(abstract[i])) {
      ++i;
      continue;
    }
    std::size_t punct_end = i + 1;
    while (punct_end < n && is_sentence_punct(abstract[punct_end])) ++punct_end;
    std::size_t next = punct_end;
    while (next < n && std::isspace(static_cast<unsigned char>(abstract[next]))) ++next;

    bool boundary = false;
    if (next == n) {
      boundary = true;
    } else if (next > punct_end && std::isupper(static_cast<unsigned char>(abstract[next]))) {
      boundary = !ends_with_abbreviation(std::string_view(abstract).substr(start, punct_end - start));
    }
    if (boundary) {
      emit(punct_end);
      start = next;
      i = next;
    } else {
      i = punct_end;
    }
  }
  if (start < n) emit(n);
  return sentences;
}

namespace {

struct CueTable {
  SectionLabel label;
  std::vector<std::string> phrases;
};

const std::vector<CueTable>& cue_tables() {
  static const std::vector<CueTable> tables = {
      {SectionLabel::background,
       {"in recent years", "recently", "increasingly", "has become", "have become",
        "widely used", "widely studied", "existing", "traditional", "conventional",
        "prior work", "previous studies", "previous work", "however", "challenge",
        "challenging", "growing interest", "plays an important role", "important role",
        "has attracted", "is a fundamental", "are essential", "suffer from"}},
      {SectionLabel::method,
       {"we propose", "we present", "we introduce", "we develop", "we design",
        "we describe", "we implement", "we use", "we apply", "we adopt", "we train",
        "we combine", "we extend", "we formulate", "we model", "our method",
        "our approach", "our model", "our algorithm", "our framework", "our system",
        "is proposed", "proposed method", "based on", "by using", "algorithm",
        "architecture", "framework", "pipeline", "procedure", "is trained"}},
      {SectionLabel::results,
       {"results show", "results demonstrate", "results indicate", "experimental results",
        "experiments show", "experiments demonstrate", "evaluation shows", "we observe",
        "we find that", "we achieve", "achieves", "outperforms", "outperform", "improves",
        "improvement", "gain", "accuracy", "recall", "precision", "f1", "error rate",
        "state-of-the-art performance", "significantly better", "%"}},
      {SectionLabel::objective,
       {"we aim", "aims to", "aim of this", "our goal", "the goal of", "the objective",
        "the purpose of", "we seek to", "this paper aims", "in this work, we focus"}},
      {SectionLabel::other,
       {"the rest of this paper", "this paper is organized", "we thank", "acknowledg",
        "source code", "available at", "https://", "http://"}},
  };
  return tables;
}

}  // namespace

std::array<double, kCategoryCount> HeuristicClassifier::probabilities(
    const std::string& sentence) const {
  std::array<double, kCategoryCount> scores{};
  scores.fill(0.05);  // smoothing keeps every probability positive

  const std::string lower = lowercase(sentence);
  double total_hits = 0.0;
  for (const CueTable& table : cue_tables()) {
    for (const std::string& phrase : table.phrases) {
      if (lower.find(phrase) != std::string::npos) {
        scores[static_cast<std::size_t>(table.label)] += 1.0;
        total_hits += 1.0;
      }
    }
  }
  if (total_hits == 0.0) {
    scores[static_cast<std::size_t>(SectionLabel::background)] += 1.0;
  }

  double sum = 0.0;
  for (double s : scores) sum += s;
  for (double& s : scores) s /= sum;
  return scores;
}

SentenceClassification classify_sentence(const SentenceClassifier& classifier,
                                         const std::string& sentence) {
  SentenceClassification result;
  result.sentence = sentence;
  result.probabilities = classifier.probabilities(sentence);

  double sum = 0.0;
  for (double p : result.probabilities) {
    if (p < 0.0) throw NumericError("classifier produced a negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw NumericError("classifier probabilities sum to " + std::to_string(sum));
  }
  return result;
}

SectionedAbstract assemble(const std::vector<SentenceClassification>& classified) {
  SectionedAbstract sectioned;
  for (const SentenceClassification& entry : classified) {
    switch (entry.label()) {
      case SectionLabel::background: sectioned.background.push_back(entry.sentence); break;
      case SectionLabel::method: sectioned.method.push_back(entry.sentence); break;
      case SectionLabel::results: sectioned.results.push_back(entry.sentence); break;
      default: sectioned.residual.push_back(entry.sentence); break;
    }
  }
  return sectioned;
}

std::string section_text(const SectionedAbstract& sectioned, SectionLabel label,
                         const std::string& title, const std::string& separator) {
  if (label != SectionLabel::background && label != SectionLabel::method &&
      label != SectionLabel::results) {
    throw UsageError("section_text expects one of the kept section labels");
  }
  const std::vector<std::string>& sentences = sectioned.section(label);
  if (sentences.empty()) return title;

  std::string body;
  for (const std::string& sentence : sentences) {
    if (!body.empty()) body += ' ';
    body += sentence;
  }
  return title + separator + body;
}

PrecomputedLabels PrecomputedLabels::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read labels file: " + path.string());

  PrecomputedLabels store;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trimmed(line).empty()) continue;
    nlohmann::json object = nlohmann::json::parse(line, nullptr, false);
    if (object.is_discarded() || !object.contains("id") || !object.contains("labels")) {
      throw DataError("malformed labels line " + std::to_string(line_number) + " in " +
                      path.string());
    }
    const std::string id = object["id"].get<std::string>();
    std::vector<std::array<double, kCategoryCount>> rows;
    for (const auto& row : object["labels"]) {
      if (!row.is_array() || row.size() != kCategoryCount) {
        throw DataError("labels for paper " + id + " must be arrays of 5 floats");
      }
      std::array<double, kCategoryCount> values{};
      double sum = 0.0;
      for (std::size_t i = 0; i < kCategoryCount; ++i) {
        values[i] = row[i].get<double>();
        if (values[i] < 0.0) throw DataError("negative label probability for paper " + id);
        sum += values[i];
      }
      if (std::abs(sum - 1.0) > 1e-6) {
        throw DataError("label probabilities for paper " + id + " do not sum to 1");
      }
      rows.push_back(values);
    }
    if (!store.labels_.emplace(id, std::move(rows)).second) {
      throw DataError("duplicate labels for paper " + id);
    }
  }
  return store;
}

const std::vector<std::array<double, kCategoryCount>>* PrecomputedLabels::find(
    const std::string& id) const {
  auto it = labels_.find(id);
  return it == labels_.end() ? nullptr : &it->second;
}

PaperSectioner::PaperSectioner(std::shared_ptr<const SentenceClassifier> classifier)
    : classifier_(std::move(classifier)) {
  if (!classifier_) throw UsageError("PaperSectioner requires a classifier");
}

PaperSectioner::PaperSectioner(std::shared_ptr<const SentenceClassifier> classifier,
                               PrecomputedLabels labels)
    : classifier_(std::move(classifier)), labels_(std::move(labels)), use_labels_(true) {}

SectionedAbstract PaperSectioner::section(const std::string& paper_id,
                                          const std::string& abstract) const {
  const std::vector<std::string> sentences = split_sentences(abstract);

  std::vector<SentenceClassification> classified;
  classified.reserve(sentences.size());
  if (use_labels_) {
    const auto* rows = labels_.find(paper_id);
    if (rows == nullptr) {
      throw DataError("no precomputed labels for paper " + paper_id);
    }
    if (rows->size() != sentences.size()) {
      throw DataError("labels for paper " + paper_id + " cover " +
                      std::to_string(rows->size()) + " sentences, abstract has " +
                      std::to_string(sentences.size()));
    }
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      SentenceClassification entry;
      entry.sentence = sentences[i];
      entry.probabilities = (*rows)[i];
      classified.push_back(std::move(entry));
    }
  } else {
    for (const std::string& sentence : sentences) {
      classified.push_back(classify_sentence(*classifier_, sentence));
    }
  }
  return assemble(classified);
}

std::string PaperSectioner::classifier_name() const {
  return use_labels_ ? "precomputed" : classifier_->name();
}

}  // namespace sectra
