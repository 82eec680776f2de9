#ifndef SECTRA_EMBEDDER_HPP_
#define SECTRA_EMBEDDER_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace sectra {

using Vector = Eigen::VectorXd;

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Deterministic within a provider instance: same text, same vector.
  virtual Vector embed(const std::string& text) = 0;
  virtual int dimension() const = 0;
  virtual std::string id() const = 0;
};

// Feature-hashing embedder: lowercase tokens split on non-alphanumerics, each
// hashed (keyed by seed) to an index and a sign; signed counts, L2-normalized.
// Empty text maps to the zero vector.
Vector hashed_embed(const std::string& text, int dimension, std::uint64_t seed);

class HashedEmbedder final : public EmbeddingProvider {
 public:
  HashedEmbedder(int dimension, std::uint64_t seed);
  Vector embed(const std::string& text) override;
  int dimension() const override { return dimension_; }
  std::string id() const override;

 private:
  int dimension_;
  std::uint64_t seed_;
};

// JSONL embedding store: `{"key","vec":[d floats]}` per line, exact decimal
// round-trip. Ordered by key on disk.
using EmbeddingStore = std::map<std::string, Vector>;

void store_write(const std::filesystem::path& path,
                 const std::vector<std::pair<std::string, Vector>>& records);
void store_write(const std::filesystem::path& path, const EmbeddingStore& store);
EmbeddingStore store_read(const std::filesystem::path& path);

// Key under which a text's embedding is stored: hex of its stable hash.
std::string text_key(const std::string& text);

// Serves embeddings from a store keyed by text_key(); unknown text is fatal.
class FileEmbedder final : public EmbeddingProvider {
 public:
  explicit FileEmbedder(const std::filesystem::path& path);
  FileEmbedder(EmbeddingStore store, std::string source_name);
  Vector embed(const std::string& text) override;
  int dimension() const override { return dimension_; }
  std::string id() const override { return "file/" + source_name_; }

 private:
  EmbeddingStore store_;
  std::string source_name_;
  int dimension_ = 0;
};

// POSTs `{"texts":[...]}` to an embedding service and expects
// `{"vectors":[[...],...]}` in the same order. Results are cached in a store
// file (written atomically) so repeated runs are offline-reproducible.
class HttpEmbedder final : public EmbeddingProvider {
 public:
  HttpEmbedder(std::string endpoint, int expected_dimension,
               std::filesystem::path cache_path, int batch_size = 16, int retries = 3);
  ~HttpEmbedder() override;

  Vector embed(const std::string& text) override;
  std::vector<Vector> embed_batch(const std::vector<std::string>& texts);
  int dimension() const override { return dimension_; }
  std::string id() const override { return "http/" + endpoint_; }
  std::size_t network_batches() const;  // for tests

 private:
  std::vector<Vector> fetch(const std::vector<std::string>& texts);
  void persist_cache_locked();

  std::string endpoint_;
  int dimension_;
  std::filesystem::path cache_path_;
  int batch_size_;
  int retries_;
  mutable std::mutex mutex_;
  EmbeddingStore cache_;
  std::size_t network_batches_ = 0;
};

// Wraps a provider with an in-memory memo and an optional preloaded store.
// Used by the pipeline so every unique text is embedded at most once.
class CachingProvider final : public EmbeddingProvider {
 public:
  CachingProvider(std::shared_ptr<EmbeddingProvider> inner, EmbeddingStore preloaded);
  Vector embed(const std::string& text) override;
  int dimension() const override;
  std::string id() const override { return inner_->id(); }
  std::size_t cache_size() const;
  EmbeddingStore snapshot() const;
  // Order-independent digest of the cached contents; training must not change it.
  std::uint64_t content_hash() const;

 private:
  std::shared_ptr<EmbeddingProvider> inner_;
  mutable std::mutex mutex_;
  EmbeddingStore cache_;
};

}  // namespace sectra

#endif  // SECTRA_EMBEDDER_HPP_
