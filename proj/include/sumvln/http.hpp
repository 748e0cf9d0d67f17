#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace sumvln {

/// "http://host:port[/prefix]". Only plain HTTP is supported.
struct HttpEndpoint {
  std::string origin;       // "http://host:port"
  std::string path_prefix;  // "" or "/prefix" without trailing slash

  /// Throws BadArgs on anything that is not an http URL.
  static HttpEndpoint parse(std::string_view url);
  std::string url_for(std::string_view path) const { return origin + path_prefix + std::string(path); }
};

struct HttpResult {
  int status = 0;
  std::string body;
  std::string content_type;
};

/// Returns nullopt on transport failure (connection refused, timeout, ...).
std::optional<HttpResult> http_post(const HttpEndpoint& endpoint, std::string_view path, const std::string& body,
                                    std::string_view content_type,
                                    std::chrono::milliseconds timeout = std::chrono::seconds(120));

}  // namespace sumvln
