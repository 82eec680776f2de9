#include "sectra/embedder.hpp"

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sectra/errors.hpp"
#include "sectra/rng.hpp"

namespace sectra {

using ordered_json = nlohmann::ordered_json;

Vector hashed_embed(const std::string& text, int dimension, std::uint64_t seed) {
  if (dimension < 1) throw UsageError("embedding dimension must be >= 1");
  Vector vec = Vector::Zero(dimension);

  std::string token;
  auto flush = [&]() {
    if (token.empty()) return;
    const std::uint64_t h = stable_hash64(token, seed);
    const Eigen::Index index = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dimension));
    const double sign = (h >> 63) ? -1.0 : 1.0;
    vec[index] += sign;
    token.clear();
  };

  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      token += static_cast<char>(std::tolower(c));
    } else {
      flush();
    }
  }
  flush();

  const double norm = vec.norm();
  if (norm > 0.0) vec /= norm;
  return vec;
}

HashedEmbedder::HashedEmbedder(int dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension < 1) throw UsageError("embedding dimension must be >= 1");
}

Vector HashedEmbedder::embed(const std::string& text) {
  return hashed_embed(text, dimension_, seed_);
}

std::string HashedEmbedder::id() const {
  return "hashed/d=" + std::to_string(dimension_) + "/seed=" + std::to_string(seed_);
}

std::string text_key(const std::string& text) {
  constexpr std::uint64_t kTextKeySeed = 0x7365637472612d6bull;  // fixed store key seed
  const std::uint64_t h = stable_hash64(text, kTextKeySeed);
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buffer);
}

namespace {

void write_store_lines(std::ostream& out,
                       const std::vector<std::pair<std::string, Vector>>& records) {
  for (const auto& [key, vec] : records) {
    ordered_json object;
    object["key"] = key;
    ordered_json values = ordered_json::array();
    for (Eigen::Index i = 0; i < vec.size(); ++i) values.push_back(vec[i]);
    object["vec"] = std::move(values);
    out << object.dump() << '\n';
  }
}

void atomic_write(const std::filesystem::path& path,
                  const std::vector<std::pair<std::string, Vector>>& records) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot write embedding store: " + path.string());
    write_store_lines(out, records);
    if (!out) throw DataError("failed writing embedding store: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void store_write(const std::filesystem::path& path,
                 const std::vector<std::pair<std::string, Vector>>& records) {
  if (!records.empty()) {
    const Eigen::Index dimension = records.front().second.size();
    for (const auto& [key, vec] : records) {
      if (vec.size() != dimension) {
        throw DataError("embedding store dimension mismatch at key " + key);
      }
    }
  }
  atomic_write(path, records);
}

void store_write(const std::filesystem::path& path, const EmbeddingStore& store) {
  std::vector<std::pair<std::string, Vector>> records(store.begin(), store.end());
  store_write(path, records);
}

EmbeddingStore store_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read embedding store: " + path.string());

  EmbeddingStore store;
  Eigen::Index dimension = -1;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json object = nlohmann::json::parse(line, nullptr, false);
    if (object.is_discarded() || !object.contains("key") || !object.contains("vec")) {
      throw DataError("malformed embedding store line " + std::to_string(line_number) + " in " +
                      path.string());
    }
    const std::string key = object["key"].get<std::string>();
    const auto& values = object["vec"];
    Vector vec(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) vec[static_cast<Eigen::Index>(i)] = values[i].get<double>();
    if (dimension < 0) {
      dimension = vec.size();
    } else if (vec.size() != dimension) {
      throw DataError("embedding store dimension mismatch at key " + key);
    }
    store[key] = std::move(vec);
  }
  return store;
}

FileEmbedder::FileEmbedder(const std::filesystem::path& path)
    : FileEmbedder(store_read(path), path.filename().string()) {}

FileEmbedder::FileEmbedder(EmbeddingStore store, std::string source_name)
    : store_(std::move(store)), source_name_(std::move(source_name)) {
  if (store_.empty()) throw DataError("embedding store is empty: " + source_name_);
  dimension_ = static_cast<int>(store_.begin()->second.size());
}

Vector FileEmbedder::embed(const std::string& text) {
  auto it = store_.find(text_key(text));
  if (it == store_.end()) {
    throw DataError("text not present in embedding store " + source_name_ +
                    " (key " + text_key(text) + "); re-run the embed step");
  }
  return it->second;
}

CachingProvider::CachingProvider(std::shared_ptr<EmbeddingProvider> inner,
                                 EmbeddingStore preloaded)
    : inner_(std::move(inner)), cache_(std::move(preloaded)) {
  if (!inner_) throw UsageError("CachingProvider requires a provider");
}

Vector CachingProvider::embed(const std::string& text) {
  const std::string key = text_key(text);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  Vector vec = inner_->embed(text);
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.emplace(key, std::move(vec)).first->second;
}

int CachingProvider::dimension() const { return inner_->dimension(); }

std::size_t CachingProvider::cache_size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.size();
}

EmbeddingStore CachingProvider::snapshot() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_;
}

std::uint64_t CachingProvider::content_hash() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::uint64_t digest = 0;
  for (const auto& [key, vec] : cache_) {
    std::uint64_t h = stable_hash64(key, 1);
    for (Eigen::Index i = 0; i < vec.size(); ++i) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(double));
      std::memcpy(&bits, &vec[i], sizeof(bits));
      std::uint64_t s = h ^ bits;
      h = splitmix64(s);
    }
    digest ^= h;  // order-independent
  }
  return digest;
}

}  // namespace sectra
