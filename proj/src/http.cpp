#include "sumvln/http.hpp"

#include <httplib.h>

#include "sumvln/error.hpp"

namespace sumvln {

HttpEndpoint HttpEndpoint::parse(std::string_view url) {
  constexpr std::string_view kScheme = "http://";
  if (url.substr(0, kScheme.size()) != kScheme || url.size() == kScheme.size()) {
    throw Error(ErrorCode::BadArgs, "endpoint must be an http:// URL, got '" + std::string(url) + "'");
  }
  HttpEndpoint ep;
  const auto slash = url.find('/', kScheme.size());
  ep.origin = std::string(url.substr(0, slash));
  if (slash != std::string_view::npos) {
    std::string prefix(url.substr(slash));
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    ep.path_prefix = prefix;
  }
  return ep;
}

std::optional<HttpResult> http_post(const HttpEndpoint& endpoint, std::string_view path, const std::string& body,
                                    std::string_view content_type, std::chrono::milliseconds timeout) {
  httplib::Client client(endpoint.origin);
  client.set_connection_timeout(std::min<std::chrono::milliseconds>(timeout, std::chrono::seconds(10)));
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  const std::string full_path = endpoint.path_prefix + std::string(path);
  auto res = client.Post(full_path, body, std::string(content_type));
  if (!res) {
    return std::nullopt;
  }
  HttpResult out;
  out.status = res->status;
  out.body = std::move(res->body);
  out.content_type = res->get_header_value("Content-Type");
  return out;
}

}  // namespace sumvln
