#pragma once

#include <chrono>
#include <string>

namespace cotalk::detail {

struct HttpTarget {
  std::string base;  // scheme://host[:port]
  std::string path;  // full request path
};

/// Splits "http://host:port/v1" into base and path, appending `suffix`.
HttpTarget parse_endpoint(const std::string& endpoint, const std::string& suffix);

struct HttpReply {
  bool transport_ok = false;
  int status = 0;
  std::string body;
  std::string error;
  bool timed_out = false;  // transport failure caused by the timeout
};

HttpReply post_json(const HttpTarget& target, const std::string& body, const std::string& api_key,
                    std::chrono::seconds timeout);

struct MultipartFile {
  std::string field;
  std::string filename;
  std::string content_type;
  std::string content;
};

HttpReply post_multipart(const HttpTarget& target, const MultipartFile& file,
                         const std::string& model, const std::string& api_key,
                         std::chrono::seconds timeout);

std::string getenv_or(const std::string& name, const std::string& fallback);

}  // namespace cotalk::detail
