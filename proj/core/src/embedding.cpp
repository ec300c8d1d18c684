#include "cotalk/embedding.hpp"

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "cotalk/error.hpp"
#include "cotalk/text.hpp"
#include "http_util.hpp"

namespace cotalk::metrics {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void add_feature(Embedding& v, std::string_view feature, float weight) {
  std::uint64_t h = fnv1a(feature);
  std::size_t idx = static_cast<std::size_t>(h % v.size());
  float sign = ((h >> 63) & 1U) ? -1.0F : 1.0F;
  v[idx] += sign * weight;
}

}  // namespace

double cosine_similarity(std::span<const float> a, std::span<const float> b) noexcept {
  if (a.size() != b.size() || a.empty()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<Embedding> HashEmbeddingProvider::embed(std::span<const std::string> texts) const {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const std::string& raw : texts) {
    Embedding v(dimensions_, 0.0F);
    std::string norm = text::normalize(raw);
    for (const std::string& w : text::split_words(norm)) add_feature(v, "w:" + w, 1.0F);
    std::string padded = " " + norm + " ";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      add_feature(v, "c:" + padded.substr(i, 3), 0.25F);
    }
    double n = 0.0;
    for (float x : v) n += static_cast<double>(x) * x;
    if (n > 0.0) {
      auto inv = static_cast<float>(1.0 / std::sqrt(n));
      for (float& x : v) x *= inv;
    }
    out.push_back(std::move(v));
  }
  return out;
}

HttpEmbeddingConfig HttpEmbeddingConfig::from_env(const std::string& endpoint_var,
                                                  const std::string& model_var,
                                                  const std::string& key_var) {
  HttpEmbeddingConfig c;
  c.endpoint = detail::getenv_or(endpoint_var, "");
  c.model = detail::getenv_or(model_var, "");
  c.api_key = detail::getenv_or(key_var, "");
  if (c.endpoint.empty()) {
    throw Error(ErrorCode::InvalidConfig, endpoint_var + " is not set");
  }
  return c;
}

std::vector<Embedding> HttpEmbeddingProvider::embed(std::span<const std::string> texts) const {
  if (texts.empty()) return {};
  nlohmann::json body = {{"model", config_.model},
                         {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  detail::HttpTarget target = detail::parse_endpoint(config_.endpoint, "/embeddings");
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
    detail::HttpReply reply =
        detail::post_json(target, body.dump(), config_.api_key, config_.timeout);
    if (!reply.transport_ok || reply.status >= 500 || reply.status == 429) {
      last_error = reply.transport_ok ? "HTTP " + std::to_string(reply.status) : reply.error;
      continue;
    }
    if (reply.status != 200) {
      throw Error(ErrorCode::ProviderUnavailable,
                  "embedding endpoint returned HTTP " + std::to_string(reply.status));
    }
    try {
      auto doc = nlohmann::json::parse(reply.body);
      std::vector<Embedding> out(texts.size());
      std::size_t position = 0;
      for (const auto& item : doc.at("data")) {
        std::size_t idx = item.value("index", position);
        ++position;
        if (idx >= out.size()) throw Error(ErrorCode::MalformedResponse, "embedding index");
        out[idx] = item.at("embedding").get<Embedding>();
      }
      for (const Embedding& e : out) {
        if (e.empty()) throw Error(ErrorCode::MalformedResponse, "embedding reply is missing vectors");
      }
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedResponse, std::string("embedding reply: ") + e.what());
    }
  }
  throw Error(ErrorCode::ProviderUnavailable,
              "embedding provider unreachable after retries: " + last_error);
}

}  // namespace cotalk::metrics
