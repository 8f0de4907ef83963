#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

#include "sure/error.hpp"
#include "sure/gateway.hpp"

namespace sure {

namespace {

class HttpTransport final : public Transport {
public:
  HttpTransport(std::string base_url, std::string api_key, std::chrono::milliseconds timeout)
      : base_url_(std::move(base_url)), api_key_(std::move(api_key)), timeout_(timeout) {
    // Split "scheme://host[:port]/prefix" into the client origin and path prefix.
    const auto scheme_end = base_url_.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint must be a URL: " + base_url_);
    const auto path_start = base_url_.find('/', scheme_end + 3);
    origin_ = base_url_.substr(0, path_start);
    prefix_ = path_start == std::string::npos ? std::string() : base_url_.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }

  HttpResponse post(const std::string& path, const std::string& body) override {
    httplib::Client client(origin_);
    const auto secs = timeout_.count() / 1000;
    const auto usecs = (timeout_.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post(prefix_ + "/" + path, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      const bool timeout = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
      throw GatewayError(timeout ? GatewayError::Kind::Timeout : GatewayError::Kind::Transport, 0,
                         "transport error: " + httplib::to_string(err));
    }
    return HttpResponse{res->status, res->body};
  }

  std::string endpoint_id() const override { return base_url_; }

private:
  std::string base_url_;
  std::string api_key_;
  std::chrono::milliseconds timeout_;
  std::string origin_;
  std::string prefix_;
};

}  // namespace

std::unique_ptr<Transport> make_http_transport(const std::string& base_url, std::string api_key,
                                               std::chrono::milliseconds timeout) {
  return std::make_unique<HttpTransport>(base_url, std::move(api_key), timeout);
}

std::unique_ptr<Transport> make_transport(const std::string& endpoint,
                                          const std::string& api_key_env,
                                          std::chrono::milliseconds timeout) {
  if (endpoint.rfind("mock:", 0) == 0) return make_mock_transport(endpoint.substr(5));
  std::string key;
  if (!api_key_env.empty()) {
    if (const char* v = std::getenv(api_key_env.c_str())) key = v;
  }
  return make_http_transport(endpoint, std::move(key), timeout);
}

}  // namespace sure
