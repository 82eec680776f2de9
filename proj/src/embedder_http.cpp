#include "sectra/embedder.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

// httplib's transitive system headers clash with Eigen when included first.
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sectra/errors.hpp"

namespace sectra {

namespace {

// Splits "http://host:port/path" into the client base and the request path.
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const std::size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos) {
    throw UsageError("embedding endpoint must include a scheme: " + endpoint);
  }
  const std::size_t path_start = endpoint.find('/', scheme + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

HttpEmbedder::HttpEmbedder(std::string endpoint, int expected_dimension,
                           std::filesystem::path cache_path, int batch_size, int retries)
    : endpoint_(std::move(endpoint)),
      dimension_(expected_dimension),
      cache_path_(std::move(cache_path)),
      batch_size_(batch_size),
      retries_(retries) {
  if (batch_size_ < 1) throw UsageError("http embedder batch size must be >= 1");
  if (retries_ < 0) throw UsageError("http embedder retries must be >= 0");
  if (!cache_path_.empty() && std::filesystem::exists(cache_path_)) {
    cache_ = store_read(cache_path_);
    if (!cache_.empty()) {
      const int cached_dimension = static_cast<int>(cache_.begin()->second.size());
      if (dimension_ > 0 && cached_dimension != dimension_) {
        throw DataError("embedding cache dimension " + std::to_string(cached_dimension) +
                        " does not match configured dimension " + std::to_string(dimension_));
      }
      dimension_ = cached_dimension;
    }
  }
}

HttpEmbedder::~HttpEmbedder() = default;

Vector HttpEmbedder::embed(const std::string& text) {
  return embed_batch({text}).front();
}

std::vector<Vector> HttpEmbedder::embed_batch(const std::vector<std::string>& texts) {
  std::lock_guard<std::mutex> lock(mutex_);

  std::vector<std::string> missing;
  for (const std::string& text : texts) {
    if (cache_.find(text_key(text)) == cache_.end()) missing.push_back(text);
  }

  for (std::size_t offset = 0; offset < missing.size();
       offset += static_cast<std::size_t>(batch_size_)) {
    const std::size_t end =
        std::min(missing.size(), offset + static_cast<std::size_t>(batch_size_));
    std::vector<std::string> chunk(missing.begin() + offset, missing.begin() + end);
    std::vector<Vector> vectors = fetch(chunk);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      cache_[text_key(chunk[i])] = std::move(vectors[i]);
    }
    persist_cache_locked();
  }

  std::vector<Vector> result;
  result.reserve(texts.size());
  for (const std::string& text : texts) result.push_back(cache_.at(text_key(text)));
  return result;
}

std::vector<Vector> HttpEmbedder::fetch(const std::vector<std::string>& texts) {
  const auto [base, path] = split_endpoint(endpoint_);

  nlohmann::json request;
  request["texts"] = texts;
  const std::string body = request.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= retries_; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));

    httplib::Client client(base);
    client.set_read_timeout(30, 0);
    httplib::Result response = client.Post(path, body, "application/json");
    if (!response) {
      last_error = "connection failed";
      continue;
    }
    if (response->status != 200) {
      last_error = "status " + std::to_string(response->status);
      continue;
    }
    nlohmann::json parsed = nlohmann::json::parse(response->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("vectors") || !parsed["vectors"].is_array()) {
      last_error = "malformed response body";
      continue;
    }
    const auto& rows = parsed["vectors"];
    if (rows.size() != texts.size()) {
      last_error = "protocol error: " + std::to_string(rows.size()) + " vectors for " +
                   std::to_string(texts.size()) + " texts";
      continue;
    }
    std::vector<Vector> vectors;
    vectors.reserve(rows.size());
    bool ok = true;
    for (const auto& row : rows) {
      Vector vec(row.size());
      for (std::size_t i = 0; i < row.size(); ++i) {
        vec[static_cast<Eigen::Index>(i)] = row[i].get<double>();
      }
      if (dimension_ <= 0) dimension_ = static_cast<int>(vec.size());
      if (static_cast<int>(vec.size()) != dimension_) {
        last_error = "dimension drift: got " + std::to_string(vec.size()) + ", expected " +
                     std::to_string(dimension_);
        ok = false;
        break;
      }
      vectors.push_back(std::move(vec));
    }
    if (!ok) continue;
    ++network_batches_;
    return vectors;
  }
  throw DataError("embedding service " + endpoint_ + " failed after " +
                  std::to_string(retries_ + 1) + " attempts: " + last_error);
}

void HttpEmbedder::persist_cache_locked() {
  if (cache_path_.empty()) return;
  store_write(cache_path_, cache_);  // atomic temp-and-rename
}

std::size_t HttpEmbedder::network_batches() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return network_batches_;
}

}  // namespace sectra
