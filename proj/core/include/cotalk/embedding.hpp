#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cotalk::metrics {

using Embedding = std::vector<float>;

/// Text in, fixed-length vector out. Implementations must be safe to call
/// from several threads at once.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<Embedding> embed(std::span<const std::string> texts) const = 0;
};

double cosine_similarity(std::span<const float> a, std::span<const float> b) noexcept;

/// Deterministic stand-in: signed feature hashing of word unigrams and
/// character trigrams, L2-normalized. Phrases that share words land close.
class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::size_t dimensions = 256) : dimensions_(dimensions) {}
  std::vector<Embedding> embed(std::span<const std::string> texts) const override;

 private:
  std::size_t dimensions_;
};

struct HttpEmbeddingConfig {
  std::string endpoint;  // e.g. http://localhost:8080/v1
  std::string model;
  std::string api_key;
  int max_retries = 3;
  std::chrono::milliseconds backoff{200};
  std::chrono::seconds timeout{30};

  /// Reads COTALK_EMBED_ENDPOINT, COTALK_EMBED_MODEL, COTALK_EMBED_API_KEY
  /// (or the variable names given).
  static HttpEmbeddingConfig from_env(const std::string& endpoint_var = "COTALK_EMBED_ENDPOINT",
                                      const std::string& model_var = "COTALK_EMBED_MODEL",
                                      const std::string& key_var = "COTALK_EMBED_API_KEY");
};

/// OpenAI-style POST {endpoint}/embeddings client. Throws ProviderUnavailable
/// once retries are exhausted.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(HttpEmbeddingConfig config) : config_(std::move(config)) {}
  std::vector<Embedding> embed(std::span<const std::string> texts) const override;

 private:
  HttpEmbeddingConfig config_;
};

}  // namespace cotalk::metrics
