#include "cotalk/gateway.hpp"

#include <algorithm>
#include <array>
#include <regex>
#include <thread>

#include "cotalk/error.hpp"
#include "cotalk/hash.hpp"
#include "cotalk/mock_rules.hpp"
#include "cotalk/text.hpp"
#include "http_util.hpp"

namespace cotalk::gateway {

using nlohmann::json;

namespace {

std::int64_t words(std::string_view s) { return static_cast<std::int64_t>(text::word_count(s)); }

std::int64_t slot_words(const SlotBindings& slots) {
  std::int64_t n = 0;
  for (const auto& [name, value] : slots) n += words(value);
  return n;
}

const std::string& slot(const GatewayRequest& r, std::string_view name) {
  auto it = r.slots.find(std::string(name));
  if (it == r.slots.end()) {
    throw Error(ErrorCode::InvalidArgument, "request lacks slot '" + std::string(name) + "'");
  }
  return it->second;
}

bool transient(ErrorCode c) {
  return c == ErrorCode::ProviderTimeout || c == ErrorCode::ProviderUnavailable;
}

class SemaphoreGuard {
 public:
  explicit SemaphoreGuard(std::counting_semaphore<1024>& s) : s_(s) { s_.acquire(); }
  ~SemaphoreGuard() { s_.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

 private:
  std::counting_semaphore<1024>& s_;
};

std::string strip_prefix(std::string reply, const std::string& prefix) {
  std::string t = text::trim(reply);
  if (!prefix.empty() && t.rfind(prefix, 0) == 0) t = text::trim(t.substr(prefix.size()));
  return t;
}

ErrorCode transport_error_code(const detail::HttpReply& reply) {
  return reply.timed_out ? ErrorCode::ProviderTimeout : ErrorCode::ProviderUnavailable;
}

constexpr std::array<std::string_view, 6> kAudioFormats{"wav", "webm", "ogg", "mp3", "flac", "m4a"};

}  // namespace

json GatewayRequest::to_json() const {
  return {{"template_id", to_string(template_id)},
          {"prompt_version", prompt_version()},
          {"slots", slots},
          {"temperature", params.temperature},
          {"max_output_tokens", params.max_output_tokens},
          {"repair_note", repair_note}};
}

std::string GatewayRequest::effective_key() const {
  return idempotency_key.empty() ? sha256_hex(to_json().dump()) : idempotency_key;
}

json GatewayResponse::to_json() const {
  return {{"text", text},
          {"input_token_count", input_token_count},
          {"output_token_count", output_token_count},
          {"latency_ms", latency_ms}};
}

GatewayResponse GatewayResponse::from_json(const json& doc) {
  GatewayResponse r;
  r.text = doc.at("text").get<std::string>();
  r.input_token_count = doc.at("input_token_count").get<std::int64_t>();
  r.output_token_count = doc.at("output_token_count").get<std::int64_t>();
  r.latency_ms = doc.at("latency_ms").get<double>();
  return r;
}

GatewayResponse MockChatBackend::complete(const GatewayRequest& request, const PromptTemplate&) {
  GatewayResponse r;
  switch (request.template_id) {
    case TemplateId::merge_parallel:
      r.text = mock::merge_sequential(slot(request, slots::kFirst), slot(request, slots::kParallel));
      break;
    case TemplateId::merge_sequential:
      r.text = mock::merge_sequential(slot(request, slots::kFirst), slot(request, slots::kSequential));
      break;
    case TemplateId::denoise:
      r.text = mock::denoise(slot(request, slots::kMergedCaption));
      break;
    case TemplateId::extract_units:
      r.text = mock::extract(slot(request, slots::kProcessedCaption)).dump(2);
      break;
    case TemplateId::generate_questions:
      r.text = mock::questions(slot(request, slots::kCaption));
      break;
    default:
      throw Error(ErrorCode::InvalidArgument,
                  std::string(to_string(request.template_id)) + " is a guideline, not a call");
  }
  r.input_token_count = slot_words(request.slots);
  r.output_token_count = words(r.text);
  return r;
}

HttpChatConfig HttpChatConfig::from_env(const std::string& prefix) {
  HttpChatConfig c;
  c.endpoint = detail::getenv_or(prefix + "_ENDPOINT", "");
  c.model = detail::getenv_or(prefix + "_MODEL", "");
  c.api_key = detail::getenv_or(prefix + "_API_KEY", "");
  if (c.endpoint.empty()) throw Error(ErrorCode::InvalidConfig, prefix + "_ENDPOINT is not set");
  return c;
}

GatewayResponse HttpChatBackend::complete(const GatewayRequest& request,
                                          const PromptTemplate& prompt) {
  std::string user = prompt.render_user(request.slots);
  if (!request.repair_note.empty()) user += "\n\n" + request.repair_note;
  json messages = json::array({{{"role", "system"}, {"content", prompt.system_text}},
                               {{"role", "user"}, {"content", user}}});
  if (!prompt.assistant_prefix.empty()) {
    messages.push_back({{"role", "assistant"}, {"content", prompt.assistant_prefix}});
  }
  json body = {{"model", config_.model},
               {"messages", messages},
               {"temperature", request.params.temperature},
               {"max_tokens", request.params.max_output_tokens}};

  auto target = detail::parse_endpoint(config_.endpoint, "/chat/completions");
  auto reply = detail::post_json(target, body.dump(), config_.api_key, config_.timeout);
  if (!reply.transport_ok) {
    throw Error(transport_error_code(reply), "chat endpoint: " + reply.error);
  }
  if (reply.status == 429 || reply.status >= 500) {
    throw Error(ErrorCode::ProviderUnavailable,
                "chat endpoint returned HTTP " + std::to_string(reply.status));
  }
  if (reply.status != 200) {
    throw Error(ErrorCode::GatewayFailure,
                "chat endpoint returned HTTP " + std::to_string(reply.status));
  }
  GatewayResponse r;
  try {
    json doc = json::parse(reply.body);
    r.text = strip_prefix(doc.at("choices").at(0).at("message").at("content").get<std::string>(),
                          prompt.assistant_prefix);
    const json usage = doc.value("usage", json::object());
    r.input_token_count = usage.value("prompt_tokens", slot_words(request.slots));
    r.output_token_count = usage.value("completion_tokens", words(r.text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("chat reply: ") + e.what());
  }
  return r;
}

bool is_supported_audio_format(std::string_view tag) noexcept {
  return std::find(kAudioFormats.begin(), kAudioFormats.end(), tag) != kAudioFormats.end();
}

std::string MockSpeechBackend::transcribe(std::string_view audio, std::string_view) {
  return mock::read_audio_fixture(audio);
}

HttpSpeechConfig HttpSpeechConfig::from_env(const std::string& prefix) {
  HttpSpeechConfig c;
  c.endpoint = detail::getenv_or(prefix + "_ENDPOINT", "");
  c.model = detail::getenv_or(prefix + "_MODEL", "");
  c.api_key = detail::getenv_or(prefix + "_API_KEY", "");
  if (c.endpoint.empty()) throw Error(ErrorCode::InvalidConfig, prefix + "_ENDPOINT is not set");
  return c;
}

std::string HttpSpeechBackend::transcribe(std::string_view audio, std::string_view format_tag) {
  auto target = detail::parse_endpoint(config_.endpoint, "/audio/transcriptions");
  detail::MultipartFile file{"file", "audio." + std::string(format_tag),
                             "audio/" + std::string(format_tag), std::string(audio)};
  auto reply = detail::post_multipart(target, file, config_.model, config_.api_key, config_.timeout);
  if (!reply.transport_ok) {
    throw Error(transport_error_code(reply), "speech endpoint: " + reply.error);
  }
  if (reply.status == 429 || reply.status >= 500) {
    throw Error(ErrorCode::ProviderUnavailable,
                "speech endpoint returned HTTP " + std::to_string(reply.status));
  }
  if (reply.status != 200) {
    throw Error(ErrorCode::GatewayFailure,
                "speech endpoint returned HTTP " + std::to_string(reply.status));
  }
  try {
    return text::trim(json::parse(reply.body).at("text").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("speech reply: ") + e.what());
  }
}

Gateway::Gateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<SpeechBackend> speech,
                 GatewayOptions options)
    : chat_(std::move(chat)),
      speech_(std::move(speech)),
      options_(std::move(options)),
      in_flight_(std::clamp(options_.max_in_flight, 1, 1024)) {
  if (!chat_) throw Error(ErrorCode::InvalidArgument, "gateway needs a chat backend");
  if (options_.max_retries < 0) throw Error(ErrorCode::InvalidArgument, "max_retries < 0");
  if (!options_.audit_log.empty()) {
    audit_out_.open(options_.audit_log, std::ios::app);
    if (!audit_out_) {
      throw Error(ErrorCode::Io, "cannot open audit log " + options_.audit_log.string());
    }
  }
}

std::shared_ptr<Gateway> Gateway::make_mock() {
  GatewayOptions options;
  options.backoff = std::chrono::milliseconds(0);
  return make_mock(std::move(options));
}

std::shared_ptr<Gateway> Gateway::make_mock(GatewayOptions options) {
  return std::make_shared<Gateway>(std::make_shared<MockChatBackend>(),
                                   std::make_shared<MockSpeechBackend>(), std::move(options));
}

void Gateway::audit(const json& record) {
  if (!audit_out_.is_open()) return;
  std::lock_guard lock(audit_mu_);
  audit_out_ << record.dump() << '\n';
  audit_out_.flush();
}

GatewayResponse Gateway::call(const GatewayRequest& request) {
  std::string key = request.effective_key();
  {
    std::lock_guard lock(cache_mu_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      audit({{"template_id", to_string(request.template_id)}, {"key", key}, {"cached", true},
             {"ok", true}, {"input_tokens", it->second.input_token_count},
             {"output_tokens", it->second.output_token_count}});
      return it->second;
    }
  }
  GatewayResponse fresh = call_uncached(request, key);
  std::lock_guard lock(cache_mu_);
  return cache_.emplace(key, std::move(fresh)).first->second;
}

GatewayResponse Gateway::call_uncached(const GatewayRequest& request, const std::string& key) {
  const PromptTemplate& prompt = prompt_template(request.template_id);
  SemaphoreGuard guard(in_flight_);
  std::string last_error;
  ErrorCode last_code = ErrorCode::ProviderUnavailable;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0 && options_.backoff.count() > 0) {
      std::this_thread::sleep_for(options_.backoff * (1LL << (attempt - 1)));
    }
    json record = {{"template_id", to_string(request.template_id)},
                   {"key", key},
                   {"attempt", attempt},
                   {"cached", false}};
    auto start = std::chrono::steady_clock::now();
    try {
      GatewayResponse r = chat_->complete(request, prompt);
      r.latency_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start).count();
      record.update({{"ok", true},
                     {"input_tokens", r.input_token_count},
                     {"output_tokens", r.output_token_count},
                     {"latency_ms", r.latency_ms}});
      audit(record);
      return r;
    } catch (const Error& e) {
      record.update({{"ok", false}, {"error", to_string(e.code())}, {"message", e.what()}});
      audit(record);
      if (!transient(e.code())) throw;
      last_error = e.what();
      last_code = e.code();
    }
  }
  throw Error(last_code, "gateway gave up after " +
                                              std::to_string(options_.max_retries + 1) +
                                              " attempts: " + last_error);
}

std::string Gateway::merge_captions(MergeMode mode, std::span<const std::string> captions) {
  if (mode == MergeMode::sequential) {
    if (captions.size() != 2) {
      throw Error(ErrorCode::InvalidArgument, "sequential merge takes exactly two captions");
    }
    if (text::trim(captions[1]).empty()) return captions[0];
    if (text::trim(captions[0]).empty()) return captions[1];
    GatewayRequest req;
    req.template_id = TemplateId::merge_sequential;
    req.slots = {{std::string(slots::kFirst), captions[0]},
                 {std::string(slots::kSequential), captions[1]}};
    return call(req).text;
  }
  if (captions.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "parallel merge takes at least two captions");
  }
  std::vector<std::string> sorted(captions.begin(), captions.end());
  std::sort(sorted.begin(), sorted.end());
  std::string acc = sorted.front();
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (text::trim(sorted[i]).empty()) continue;
    if (text::trim(acc).empty()) {
      acc = sorted[i];
      continue;
    }
    GatewayRequest req;
    req.template_id = TemplateId::merge_parallel;
    req.slots = {{std::string(slots::kFirst), acc}, {std::string(slots::kParallel), sorted[i]}};
    acc = call(req).text;
  }
  return acc;
}

std::string Gateway::denoise(std::string_view caption) {
  if (text::trim(caption).empty()) return {};
  GatewayRequest req;
  req.template_id = TemplateId::denoise;
  req.slots = {{std::string(slots::kMergedCaption), std::string(caption)}};
  return call(req).text;
}

std::vector<semantic::SemanticUnit> Gateway::extract_units(std::string_view caption,
                                                           int source_round) {
  if (text::trim(caption).empty()) {
    throw Error(ErrorCode::InvalidArgument, "extract_units needs a non-empty caption");
  }
  GatewayRequest req;
  req.template_id = TemplateId::extract_units;
  req.slots = {{std::string(slots::kProcessedCaption), std::string(caption)}};
  try {
    return semantic::units_from_extraction_json(parse_extraction_reply(call(req).text),
                                                source_round);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MalformedResponse) throw;
    req.repair_note = std::string("Your previous reply could not be parsed (") + e.what() +
                      "). Reply with only the JSON array.";
  }
  return semantic::units_from_extraction_json(parse_extraction_reply(call(req).text),
                                              source_round);
}

std::vector<std::string> Gateway::generate_questions(std::string_view caption) {
  GatewayRequest req;
  req.template_id = TemplateId::generate_questions;
  req.slots = {{std::string(slots::kCaption), std::string(caption)}};
  return parse_questions(call(req).text);
}

std::string Gateway::transcribe(std::string_view audio, std::string_view format_tag) {
  if (!is_supported_audio_format(format_tag)) {
    throw Error(ErrorCode::UnsupportedFormat, "unsupported audio format: " + std::string(format_tag));
  }
  if (!speech_) throw Error(ErrorCode::ProviderUnavailable, "no speech backend configured");
  SemaphoreGuard guard(in_flight_);
  std::string last_error;
  ErrorCode last_code = ErrorCode::ProviderUnavailable;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0 && options_.backoff.count() > 0) {
      std::this_thread::sleep_for(options_.backoff * (1LL << (attempt - 1)));
    }
    try {
      return speech_->transcribe(audio, format_tag);
    } catch (const Error& e) {
      if (!transient(e.code())) throw;
      last_error = e.what();
      last_code = e.code();
    }
  }
  throw Error(last_code, "transcription gave up: " + last_error);
}

std::size_t Gateway::cache_size() const {
  std::lock_guard lock(cache_mu_);
  return cache_.size();
}

json parse_extraction_reply(std::string_view reply) {
  auto open = reply.find('[');
  auto close = reply.rfind(']');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw Error(ErrorCode::MalformedResponse, "reply holds no JSON array");
  }
  try {
    json doc = json::parse(reply.substr(open, close - open + 1));
    if (!doc.is_array()) throw Error(ErrorCode::MalformedResponse, "reply is not a JSON array");
    return doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("invalid JSON: ") + e.what());
  }
}

std::vector<std::string> parse_questions(std::string_view reply) {
  static const std::regex line_re(R"(^\s*[-*•]?\s*(?:\*\*)?(?:q|question)\s*(\d+)(?:\*\*)?\s*[:.)\-]\s*(?:\*\*)?\s*(.+?)\s*$)",
                                  std::regex::icase);
  static const std::vector<std::string> kPadding{
      "What kind of image is this describing?",
      "What objects can be seen in the picture?",
      "What is in the center of the picture?",
      "What's in the top left corner of the picture?",
      "What colors dominate the picture?",
  };
  std::vector<std::string> found;
  std::string s(reply);
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto nl = s.find('\n', pos);
    std::string line = s.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    std::smatch m;
    if (std::regex_match(line, m, line_re)) found.push_back(m[2].str());
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  if (found.size() > 5) found.resize(5);
  std::vector<std::string> out;
  for (std::size_t p = 0; p + found.size() < 5; ++p) out.push_back(kPadding[p]);
  out.insert(out.end(), found.begin(), found.end());
  return out;
}

}  // namespace cotalk::gateway
