#ifndef SECTRA_CORPUS_HPP_
#define SECTRA_CORPUS_HPP_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace sectra {

struct PaperRecord {
  std::string id;
  std::string title;
  std::string abstract;
  std::vector<std::string> references;  // duplicate-free, never the paper itself

  bool operator==(const PaperRecord&) const = default;
};

struct ParseReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;               // blocks/lines dropped with a reason
  std::size_t dangling_references = 0;    // references to ids not in the corpus
  std::size_t duplicate_references = 0;
  std::size_t self_references = 0;
};

// Immutable after construction; safe for concurrent reads.
class Corpus {
 public:
  void add(PaperRecord record);  // DataError on empty or duplicate id
  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  const PaperRecord& at(const std::string& id) const;  // DataError if missing
  const PaperRecord* find(const std::string& id) const;
  std::size_t size() const { return records_.size(); }
  const std::vector<PaperRecord>& records() const { return records_; }
  std::vector<std::string> sorted_ids() const;

  bool operator==(const Corpus& other) const { return records_ == other.records_; }

 private:
  std::vector<PaperRecord> records_;  // insertion order
  std::unordered_map<std::string, std::size_t> index_;
};

struct ParseResult {
  Corpus corpus;
  ParseReport report;
};

// Aminer/DBLP V1 line-prefixed blocks: `#*` title, `#index` id, `#%` reference
// (repeatable), `#!` abstract. `#@`, `#t`, `#c` and other `#` lines are
// ignored. Blocks are separated by blank lines. A block without `#index` is
// rejected and counted; an unreadable stream is fatal.
ParseResult parse_dblp_v1(std::istream& in);

// Canonical interchange: one `{"id","title","abstract","references"}` object
// per line. Malformed lines are rejected and counted; a duplicate id is fatal.
ParseResult parse_jsonl(std::istream& in);

void write_jsonl(const Corpus& corpus, std::ostream& out);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
ParseResult load_corpus_jsonl(const std::filesystem::path& path);
ParseResult load_corpus_dblp(const std::filesystem::path& path);

// Directed citation graph over a validated corpus. Neighbor lists are kept
// sorted so iteration order is deterministic.
class CitationGraph {
 public:
  static CitationGraph build(const Corpus& corpus);

  const std::vector<std::string>& out(const std::string& id) const;  // cited
  const std::vector<std::string>& in(const std::string& id) const;   // cited-by
  bool has_edge(const std::string& from, const std::string& to) const;
  std::size_t edge_count() const { return edge_count_; }

 private:
  std::unordered_map<std::string, std::vector<std::string>> out_;
  std::unordered_map<std::string, std::vector<std::string>> in_;
  std::size_t edge_count_ = 0;
  static const std::vector<std::string> kEmpty;
};

// Ids usable as query papers: non-empty abstract, at least one reference, and
// every referenced paper has a non-empty abstract. Sorted.
std::vector<std::string> eligible_queries(const Corpus& corpus, const CitationGraph& graph);

// Papers cited by a reference of the query but not by the query itself
// (and never the query). Sorted, duplicate-free; may be empty.
std::vector<std::string> hard_negatives(const CitationGraph& graph, const std::string& query_id);

}  // namespace sectra

#endif  // SECTRA_CORPUS_HPP_
