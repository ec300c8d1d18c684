#include "http_util.hpp"

#include <cstdlib>

#include <httplib.h>

#include "cotalk/error.hpp"

namespace cotalk::detail {

HttpTarget parse_endpoint(const std::string& endpoint, const std::string& suffix) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig, "endpoint must include a scheme: " + endpoint);
  }
  auto path_start = endpoint.find('/', scheme_end + 3);
  HttpTarget t;
  t.base = endpoint.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "" : endpoint.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  t.path = path + suffix;
  return t;
}

namespace {

httplib::Headers auth_headers(const std::string& api_key) {
  httplib::Headers h;
  if (!api_key.empty()) h.emplace("Authorization", "Bearer " + api_key);
  return h;
}

// httplib reports an expired read timeout as a plain read error, so the
// elapsed time decides.
HttpReply to_reply(const httplib::Result& res, std::chrono::steady_clock::time_point start,
                   std::chrono::seconds timeout) {
  HttpReply r;
  if (!res) {
    r.error = httplib::to_string(res.error());
    auto elapsed = std::chrono::steady_clock::now() - start;
    r.timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                  (res.error() == httplib::Error::Read && elapsed >= timeout * 9 / 10);
    return r;
  }
  r.transport_ok = true;
  r.status = res->status;
  r.body = res->body;
  return r;
}

void configure(httplib::Client& cli, std::chrono::seconds timeout) {
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
}

}  // namespace

HttpReply post_json(const HttpTarget& target, const std::string& body, const std::string& api_key,
                    std::chrono::seconds timeout) {
  httplib::Client cli(target.base);
  configure(cli, timeout);
  auto start = std::chrono::steady_clock::now();
  return to_reply(cli.Post(target.path, auth_headers(api_key), body, "application/json"), start,
                  timeout);
}

HttpReply post_multipart(const HttpTarget& target, const MultipartFile& file,
                         const std::string& model, const std::string& api_key,
                         std::chrono::seconds timeout) {
  httplib::Client cli(target.base);
  configure(cli, timeout);
  httplib::MultipartFormDataItems items{
      {file.field, file.content, file.filename, file.content_type},
      {"model", model, "", ""},
  };
  auto start = std::chrono::steady_clock::now();
  return to_reply(cli.Post(target.path, auth_headers(api_key), items), start, timeout);
}

std::string getenv_or(const std::string& name, const std::string& fallback) {
  const char* v = std::getenv(name.c_str());
  return v ? std::string(v) : fallback;
}

}  // namespace cotalk::detail
