#include "sectra/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "sectra/errors.hpp"

namespace sectra {

using ordered_json = nlohmann::ordered_json;

void Corpus::add(PaperRecord record) {
  if (record.id.empty()) throw DataError("paper record with empty id");
  if (!index_.emplace(record.id, records_.size()).second) {
    throw DataError("duplicate paper id: " + record.id);
  }
  records_.push_back(std::move(record));
}

const PaperRecord& Corpus::at(const std::string& id) const {
  const PaperRecord* record = find(id);
  if (record == nullptr) throw DataError("unknown paper id: " + id);
  return *record;
}

const PaperRecord* Corpus::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &records_[it->second];
}

std::vector<std::string> Corpus::sorted_ids() const {
  std::vector<std::string> ids;
  ids.reserve(records_.size());
  for (const PaperRecord& record : records_) ids.push_back(record.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

namespace {

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

void append_text(std::string& target, std::string_view addition) {
  if (addition.empty()) return;
  if (!target.empty()) target += ' ';
  target.append(addition);
}

// Drops dangling, self, and duplicate references, counting each kind.
ParseResult finalize(std::vector<PaperRecord> raw, ParseReport report) {
  std::unordered_set<std::string> known;
  known.reserve(raw.size());
  for (const PaperRecord& record : raw) {
    if (!known.insert(record.id).second) {
      throw DataError("duplicate paper id: " + record.id);
    }
  }

  ParseResult result;
  result.report = report;
  for (PaperRecord& record : raw) {
    std::vector<std::string> kept;
    std::unordered_set<std::string> seen;
    kept.reserve(record.references.size());
    for (std::string& ref : record.references) {
      if (ref == record.id) {
        ++result.report.self_references;
      } else if (known.count(ref) == 0) {
        ++result.report.dangling_references;
      } else if (!seen.insert(ref).second) {
        ++result.report.duplicate_references;
      } else {
        kept.push_back(std::move(ref));
      }
    }
    record.references = std::move(kept);
    result.corpus.add(std::move(record));
  }
  result.report.accepted = result.corpus.size();
  return result;
}

}  // namespace

ParseResult parse_dblp_v1(std::istream& in) {
  if (!in) throw DataError("unreadable corpus stream");

  std::vector<PaperRecord> raw;
  ParseReport report;

  PaperRecord current;
  bool has_id = false;
  bool in_block = false;

  auto flush = [&]() {
    if (!in_block) return;
    if (has_id) {
      raw.push_back(std::move(current));
    } else {
      ++report.rejected;
    }
    current = PaperRecord{};
    has_id = false;
    in_block = false;
  };

  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) {
      flush();
      continue;
    }
    in_block = true;
    if (line.rfind("#index", 0) == 0) {
      current.id = trim(line.substr(6));
      has_id = !current.id.empty();
    } else if (line.rfind("#*", 0) == 0) {
      append_text(current.title, trim(line.substr(2)));
    } else if (line.rfind("#%", 0) == 0) {
      std::string ref = trim(line.substr(2));
      if (!ref.empty()) current.references.push_back(std::move(ref));
    } else if (line.rfind("#!", 0) == 0) {
      append_text(current.abstract, trim(line.substr(2)));
    }
    // `#@`, `#t`, `#c`, and any other prefixed metadata are ignored.
  }
  if (in.bad()) throw DataError("unreadable corpus stream");
  flush();

  return finalize(std::move(raw), report);
}

ParseResult parse_jsonl(std::istream& in) {
  if (!in) throw DataError("unreadable corpus stream");

  std::vector<PaperRecord> raw;
  ParseReport report;

  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    nlohmann::json object = nlohmann::json::parse(line, nullptr, false);
    if (object.is_discarded() || !object.is_object() || !object.contains("id") ||
        !object["id"].is_string() || object["id"].get<std::string>().empty()) {
      ++report.rejected;
      continue;
    }
    PaperRecord record;
    record.id = object["id"].get<std::string>();
    if (object.contains("title") && object["title"].is_string()) {
      record.title = object["title"].get<std::string>();
    }
    if (object.contains("abstract") && object["abstract"].is_string()) {
      record.abstract = object["abstract"].get<std::string>();
    }
    if (object.contains("references")) {
      if (!object["references"].is_array()) {
        ++report.rejected;
        continue;
      }
      bool ok = true;
      for (const auto& ref : object["references"]) {
        if (!ref.is_string()) {
          ok = false;
          break;
        }
        record.references.push_back(ref.get<std::string>());
      }
      if (!ok) {
        ++report.rejected;
        continue;
      }
    }
    raw.push_back(std::move(record));
  }
  if (in.bad()) throw DataError("unreadable corpus stream");

  return finalize(std::move(raw), report);
}

void write_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const PaperRecord& record : corpus.records()) {
    ordered_json object;
    object["id"] = record.id;
    object["title"] = record.title;
    object["abstract"] = record.abstract;
    object["references"] = record.references;
    out << object.dump() << '\n';
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus file: " + path.string());
  write_jsonl(corpus, out);
  if (!out) throw DataError("failed writing corpus file: " + path.string());
}

ParseResult load_corpus_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read corpus file: " + path.string());
  return parse_jsonl(in);
}

ParseResult load_corpus_dblp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read corpus file: " + path.string());
  return parse_dblp_v1(in);
}

const std::vector<std::string> CitationGraph::kEmpty;

CitationGraph CitationGraph::build(const Corpus& corpus) {
  CitationGraph graph;
  for (const PaperRecord& record : corpus.records()) {
    graph.out_[record.id];  // every paper is a node
    for (const std::string& ref : record.references) {
      if (ref == record.id) throw DataError("self-loop in citation graph: " + record.id);
      if (!corpus.contains(ref)) {
        throw DataError("citation edge to unknown paper: " + record.id + " -> " + ref);
      }
      graph.out_[record.id].push_back(ref);
      graph.in_[ref].push_back(record.id);
      ++graph.edge_count_;
    }
  }
  for (auto& [id, neighbors] : graph.out_) std::sort(neighbors.begin(), neighbors.end());
  for (auto& [id, neighbors] : graph.in_) std::sort(neighbors.begin(), neighbors.end());
  return graph;
}

const std::vector<std::string>& CitationGraph::out(const std::string& id) const {
  auto it = out_.find(id);
  return it == out_.end() ? kEmpty : it->second;
}

const std::vector<std::string>& CitationGraph::in(const std::string& id) const {
  auto it = in_.find(id);
  return it == in_.end() ? kEmpty : it->second;
}

bool CitationGraph::has_edge(const std::string& from, const std::string& to) const {
  const std::vector<std::string>& neighbors = out(from);
  return std::binary_search(neighbors.begin(), neighbors.end(), to);
}

std::vector<std::string> eligible_queries(const Corpus& corpus, const CitationGraph& graph) {
  std::vector<std::string> result;
  for (const PaperRecord& record : corpus.records()) {
    if (record.abstract.empty()) continue;
    const std::vector<std::string>& refs = graph.out(record.id);
    if (refs.empty()) continue;
    bool all_have_abstracts = true;
    for (const std::string& ref : refs) {
      if (corpus.at(ref).abstract.empty()) {
        all_have_abstracts = false;
        break;
      }
    }
    if (all_have_abstracts) result.push_back(record.id);
  }
  std::sort(result.begin(), result.end());
  return result;
}

std::vector<std::string> hard_negatives(const CitationGraph& graph, const std::string& query_id) {
  std::vector<std::string> result;
  for (const std::string& cited : graph.out(query_id)) {
    for (const std::string& second_hop : graph.out(cited)) {
      if (second_hop == query_id) continue;
      if (graph.has_edge(query_id, second_hop)) continue;
      result.push_back(second_hop);
    }
  }
  std::sort(result.begin(), result.end());
  result.erase(std::unique(result.begin(), result.end()), result.end());
  return result;
}

}  // namespace sectra
