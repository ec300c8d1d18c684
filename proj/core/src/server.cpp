#include <chrono>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "cotalk/error.hpp"
#include "cotalk/gateway.hpp"
#include "cotalk/hash.hpp"
#include "cotalk/prompts.hpp"
#include "cotalk/service.hpp"

namespace cotalk::service {

using nlohmann::json;
namespace fs = std::filesystem;

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidMode:
    case ErrorCode::NonMonotoneTiming:
    case ErrorCode::InvalidScenario:
    case ErrorCode::InvalidConfig:
      return 400;
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::UnsupportedFormat:
      return 415;
    case ErrorCode::OutOfOrderRound:
    case ErrorCode::SessionClosed:
    case ErrorCode::MergePending:
    case ErrorCode::RoundLimitReached:
    case ErrorCode::PriorNotServed:
    case ErrorCode::NothingToRead:
    case ErrorCode::IncompleteParallelSession:
    case ErrorCode::EmptySession:
    case ErrorCode::SessionNotFinalized:
    case ErrorCode::LedgerIncomplete:
    case ErrorCode::MissingReference:
    case ErrorCode::ZeroTime:
    case ErrorCode::PremiseViolation:
      return 409;
    case ErrorCode::GatewayFailure:
    case ErrorCode::MalformedResponse:
      return 502;
    case ErrorCode::ProviderUnavailable:
      return 503;
    case ErrorCode::ProviderTimeout:
      return 504;
    default:
      return 500;
  }
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& msg) {
  send_json(res, status, {{"code", code}, {"message", msg}});
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("invalid JSON body: ") + e.what());
  }
}

std::string required_string(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw Error(ErrorCode::InvalidArgument, std::string("field '") + key + "' must be a string");
  }
  return j[key].get<std::string>();
}

std::int64_t now_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

chain::RoundTimestamps timestamps_from_request(const json& body) {
  chain::RoundTimestamps ts;
  auto take = [](const json& v, const std::string& what) {
    if (!v.is_number_integer()) {
      throw Error(ErrorCode::InvalidArgument, "timestamp '" + what + "' must be an integer (us)");
    }
    return v.get<std::int64_t>();
  };
  bool seen_observe = false, seen_output = false;
  auto set = [&](const std::string& kind, std::int64_t t) {
    switch (chain::parse_ledger_event_kind(kind)) {
      case chain::LedgerEventKind::observe_start: ts.observe_start = t; seen_observe = true; break;
      case chain::LedgerEventKind::observe_end: ts.observe_end = t; break;
      case chain::LedgerEventKind::read_start: ts.read_start = t; break;
      case chain::LedgerEventKind::read_end: ts.read_end = t; break;
      case chain::LedgerEventKind::output_start: ts.output_start = t; seen_output = true; break;
      case chain::LedgerEventKind::output_end: ts.output_end = t; break;
    }
  };
  if (body.contains("timings") && body["timings"].is_object()) {
    for (const auto& [k, v] : body["timings"].items()) set(k, take(v, k));
  } else if (body.contains("events") && body["events"].is_array()) {
    for (const json& e : body["events"]) {
      std::string kind = required_string(e, "event_kind");
      set(kind, take(e.value("timestamp_us", json()), kind));
    }
  } else {
    throw Error(ErrorCode::InvalidArgument, "round needs 'timings' or 'events'");
  }
  if (!seen_observe || !seen_output) {
    throw Error(ErrorCode::NonMonotoneTiming, "observe and output events are required");
  }
  // The server stamps read_start when it serves the prior caption.
  ts.read_start.reset();
  return ts;
}

json metrics_json(const metrics::IntrinsicReport& r, const metrics::DuplicationMatcher& m) {
  return {{"unit_count", r.unit_count},
          {"total_time_s", r.total_time_s},
          {"speed_units_per_s", r.speed ? json(*r.speed) : json(nullptr)},
          {"duplication_pct", r.duplication_pct},
          {"duplication_basis", "units"},
          {"matcher",
           {{"mode", m.mode() == metrics::MatchMode::exact ? "exact" : "embedding"},
            {"threshold", m.threshold()}}}};
}

json state_view(const chain::SessionState& s) {
  json j = chain::to_json(s);
  j["unit_count"] = semantic::unit_count(s.merged_tree);
  return j;
}

}  // namespace

struct Server::Impl {
  ApiConfig config;
  std::shared_ptr<SessionStore> store;
  httplib::Server http;
  int bound_port = -1;

  template <typename Fn>
  auto guarded(Fn fn) {
    return [this, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), to_string(e.code()), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "Internal", e.what());
      }
    };
  }

  fs::path audio_dir() const { return config.data_dir / "audio"; }

  void routes() {
    http.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      if (config.bearer_token.empty() || req.path == "/healthz") {
        return httplib::Server::HandlerResponse::Unhandled;
      }
      if (req.get_header_value("Authorization") != "Bearer " + config.bearer_token) {
        send_error(res, 401, "Unauthorized", "missing or wrong bearer token");
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });

    http.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}});
    });

    http.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      json body = parse_body(req);
      std::string image_ref = required_string(body, "image_ref");
      json mode_doc = body.value("mode", json("cotalk"));
      if (mode_doc.is_string() && mode_doc.get<std::string>() == "cotalk") {
        mode_doc = {{"kind", "cotalk"}};
      }
      if (mode_doc.is_object() && mode_doc.value("kind", "") == "cotalk" && !mode_doc.contains("max_rounds")) {
        int cap = config.max_rounds;
        if (body.contains("config") && body["config"].contains("max_rounds")) {
          cap = body["config"]["max_rounds"].get<int>();
        }
        mode_doc["max_rounds"] = cap;
      }
      chain::SessionMode mode = chain::mode_from_json(mode_doc);
      std::string id = store->create(image_ref, mode);
      send_json(res, 201, {{"session_id", id}});
    }));

    http.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, state_view(store->get(req.matches[1])));
    }));

    http.Get(R"(/sessions/([^/]+)/prior)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               std::string annotator = req.get_param_value("annotator_id");
               if (annotator.empty()) {
                 throw Error(ErrorCode::InvalidArgument, "query parameter annotator_id is required");
               }
               std::int64_t t = now_us();
               if (req.has_param("t_us")) {
                 try {
                   t = std::stoll(req.get_param_value("t_us"));
                 } catch (const std::exception&) {
                   throw Error(ErrorCode::InvalidArgument, "t_us must be an integer");
                 }
               }
               chain::ServedPrior p = store->serve_prior(req.matches[1], annotator, t);
               send_json(res, 200,
                         {{"merged_caption", p.merged_caption},
                          {"read_timer_token", p.read_timer_token},
                          {"read_start_us", t}});
             }));

    http.Post(R"(/sessions/([^/]+)/rounds)",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                json body = parse_body(req);
                chain::RoundSubmission sub;
                if (!body.contains("round_index") || !body["round_index"].is_number_integer()) {
                  throw Error(ErrorCode::InvalidArgument, "field 'round_index' must be an integer");
                }
                sub.round_index = body["round_index"].get<int>();
                sub.annotator_id = required_string(body, "annotator_id");
                sub.payload_kind =
                    chain::parse_payload_kind(body.value("payload_kind", std::string("typed_text")));
                sub.timestamps = timestamps_from_request(body);
                if (body.contains("audio_ref")) {
                  sub.audio_ref = required_string(body, "audio_ref");
                  std::string format = body.value("audio_format", std::string("wav"));
                  fs::path blob = audio_dir() / (sub.audio_ref + "." + format);
                  std::ifstream in(blob, std::ios::binary);
                  if (!in) throw Error(ErrorCode::NotFound, "no audio blob " + sub.audio_ref);
                  std::ostringstream data;
                  data << in.rdbuf();
                  sub.text = store->engine().gateway().transcribe(data.str(), format);
                  sub.payload_kind = chain::PayloadKind::speech_transcript;
                } else {
                  sub.text = required_string(body, "text");
                }
                send_json(res, 200, state_view(store->submit_round(req.matches[1], sub)));
              }));

    http.Post(R"(/sessions/([^/]+)/merge)",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, state_view(store->retry_merge(req.matches[1])));
              }));

    http.Post(R"(/sessions/([^/]+)/finalize)",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                json body = parse_body(req);
                send_json(res, 200,
                          state_view(store->finalize(req.matches[1], required_string(body, "annotator_id"))));
              }));

    http.Get(R"(/sessions/([^/]+)/metrics)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, metrics_json(store->report(req.matches[1]), store->matcher()));
             }));

    http.Get("/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::string format = req.has_param("format") ? req.get_param_value("format") : "jsonl";
      std::optional<std::string> mode;
      if (req.has_param("mode") && !req.get_param_value("mode").empty()) {
        mode = req.get_param_value("mode");
      }
      auto sessions = store->finalized(mode);
      res.status = 200;
      if (format == "jsonl") {
        res.set_content(export_jsonl(sessions), "application/x-ndjson");
      } else if (format == "csv") {
        res.set_content(export_metrics_csv(sessions, store->matcher()), "text/csv");
      } else {
        throw Error(ErrorCode::UnsupportedFormat, "export format must be jsonl or csv");
      }
    }));

    http.Post("/audio", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::string format = req.get_param_value("format");
      if (!gateway::is_supported_audio_format(format)) {
        throw Error(ErrorCode::UnsupportedFormat, "unsupported audio format: " + format);
      }
      if (req.body.empty()) throw Error(ErrorCode::InvalidArgument, "empty audio upload");
      std::string ref = sha256_hex(req.body);
      fs::create_directories(audio_dir());
      fs::path target = audio_dir() / (ref + "." + format);
      if (!fs::exists(target)) {
        fs::path tmp = target;
        tmp += ".tmp";
        {
          std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
          out.write(req.body.data(), static_cast<std::streamsize>(req.body.size()));
          if (!out) throw Error(ErrorCode::Io, "audio write failed");
        }
        fs::rename(tmp, target);
      }
      send_json(res, 201, {{"audio_ref", ref}, {"audio_format", format}});
    }));

    http.Get(R"(/guidelines/([a-z_]+))", guarded([](const httplib::Request& req, httplib::Response& res) {
      const auto& t = gateway::prompt_template(gateway::parse_template_id(req.matches[1].str()));
      send_json(res, 200,
                {{"template_id", gateway::to_string(t.id)},
                 {"version", gateway::prompt_version()},
                 {"text", t.system_text}});
    }));
  }
};

Server::Server(ApiConfig config, std::shared_ptr<SessionStore> store) : impl_(std::make_unique<Impl>()) {
  impl_->config = std::move(config);
  impl_->store = std::move(store);
  if (!impl_->store) throw Error(ErrorCode::InvalidArgument, "server needs a store");
  impl_->routes();
}

Server::~Server() { stop(); }

bool Server::listen() { return impl_->http.listen(impl_->config.host, impl_->config.port); }

int Server::bind_any_port(const std::string& host) {
  impl_->bound_port = impl_->http.bind_to_any_port(host);
  return impl_->bound_port;
}

bool Server::listen_after_bind() { return impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_) impl_->http.stop();
}

void Server::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace cotalk::service
