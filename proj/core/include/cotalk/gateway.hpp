#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotalk/prompts.hpp"
#include "cotalk/semantic_model.hpp"

namespace cotalk::gateway {

struct ModelParams {
  double temperature = 0.0;
  int max_output_tokens = 1024;
};

struct GatewayRequest {
  TemplateId template_id{};
  SlotBindings slots;
  ModelParams params;
  std::string idempotency_key;  // derived from the content when empty
  std::string repair_note;      // appended to the user turn on a repair retry

  nlohmann::json to_json() const;
  std::string effective_key() const;
};

struct GatewayResponse {
  std::string text;
  std::int64_t input_token_count = 0;
  std::int64_t output_token_count = 0;
  double latency_ms = 0.0;

  nlohmann::json to_json() const;
  static GatewayResponse from_json(const nlohmann::json& doc);
  bool operator==(const GatewayResponse&) const = default;
};

/// A chat model. Throw ProviderTimeout or ProviderUnavailable for transient
/// failures (the gateway retries those) and MalformedResponse otherwise.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual GatewayResponse complete(const GatewayRequest& request,
                                   const PromptTemplate& prompt) = 0;
};

/// Rule-based model built from mock_rules.hpp. Deterministic; latency 0.
class MockChatBackend final : public ChatBackend {
 public:
  GatewayResponse complete(const GatewayRequest& request, const PromptTemplate& prompt) override;
};

struct HttpChatConfig {
  std::string endpoint;  // base URL; requests go to {endpoint}/chat/completions
  std::string model;
  std::string api_key;
  std::chrono::seconds timeout{60};

  /// Reads COTALK_LLM_ENDPOINT, COTALK_LLM_MODEL and COTALK_LLM_API_KEY.
  static HttpChatConfig from_env(const std::string& prefix = "COTALK_LLM");
};

/// OpenAI-style chat completion client. The assistant prefix is sent as a
/// trailing assistant message and stripped from the reply if echoed.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpChatConfig config) : config_(std::move(config)) {}
  GatewayResponse complete(const GatewayRequest& request, const PromptTemplate& prompt) override;

 private:
  HttpChatConfig config_;
};

/// Supported audio container tags.
bool is_supported_audio_format(std::string_view tag) noexcept;

class SpeechBackend {
 public:
  virtual ~SpeechBackend() = default;
  virtual std::string transcribe(std::string_view audio, std::string_view format_tag) = 0;
};

/// Reads transcripts from fixture blobs (see mock::make_audio_fixture).
class MockSpeechBackend final : public SpeechBackend {
 public:
  std::string transcribe(std::string_view audio, std::string_view format_tag) override;
};

struct HttpSpeechConfig {
  std::string endpoint;  // requests go to {endpoint}/audio/transcriptions
  std::string model;
  std::string api_key;
  std::chrono::seconds timeout{120};

  /// Reads COTALK_STT_ENDPOINT, COTALK_STT_MODEL and COTALK_STT_API_KEY.
  static HttpSpeechConfig from_env(const std::string& prefix = "COTALK_STT");
};

class HttpSpeechBackend final : public SpeechBackend {
 public:
  explicit HttpSpeechBackend(HttpSpeechConfig config) : config_(std::move(config)) {}
  std::string transcribe(std::string_view audio, std::string_view format_tag) override;

 private:
  HttpSpeechConfig config_;
};

struct GatewayOptions {
  int max_retries = 3;
  std::chrono::milliseconds backoff{200};
  int max_in_flight = 8;
  std::filesystem::path audit_log;  // JSON lines; empty disables auditing
};

enum class MergeMode { sequential, parallel };

/// Prompt rendering, retries, idempotency cache, concurrency cap and audit
/// log around a chat backend. Safe for concurrent use.
class Gateway {
 public:
  Gateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<SpeechBackend> speech,
          GatewayOptions options = {});

  /// Mock backends with no retry backoff.
  static std::shared_ptr<Gateway> make_mock();
  static std::shared_ptr<Gateway> make_mock(GatewayOptions options);

  /// Returns the cached response when the effective key was seen before.
  GatewayResponse call(const GatewayRequest& request);

  /// Sequential: exactly {accumulated, new}. Parallel: two or more captions.
  std::string merge_captions(MergeMode mode, std::span<const std::string> captions);
  std::string denoise(std::string_view caption);
  std::vector<semantic::SemanticUnit> extract_units(std::string_view caption,
                                                    int source_round = 0);
  std::vector<std::string> generate_questions(std::string_view caption);
  std::string transcribe(std::string_view audio, std::string_view format_tag);

  std::size_t cache_size() const;
  const GatewayOptions& options() const noexcept { return options_; }

 private:
  GatewayResponse call_uncached(const GatewayRequest& request, const std::string& key);
  void audit(const nlohmann::json& record);

  std::shared_ptr<ChatBackend> chat_;
  std::shared_ptr<SpeechBackend> speech_;
  GatewayOptions options_;
  std::counting_semaphore<1024> in_flight_;

  mutable std::mutex cache_mu_;
  std::map<std::string, GatewayResponse> cache_;

  std::mutex audit_mu_;
  std::ofstream audit_out_;
};

/// Extracts the JSON array from a model reply (tolerates prose and code
/// fences around it). Throws MalformedResponse.
nlohmann::json parse_extraction_reply(std::string_view reply);

/// Parses "Q1: ..." style lines; pads with generic questions or truncates to 5.
std::vector<std::string> parse_questions(std::string_view reply);

}  // namespace cotalk::gateway
