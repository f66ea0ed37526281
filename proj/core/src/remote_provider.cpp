#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "proofgrade/embeddings.hpp"
#include "proofgrade/error.hpp"

namespace proofgrade {
namespace {

using nlohmann::json;

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw Error(ErrorKind::Config, "endpoint URL must include a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

std::vector<std::vector<double>> parse_response(const std::string& body,
                                                std::size_t expected) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProviderError(std::string("malformed embedding response: ") + e.what());
  }
  const auto data = doc.find("data");
  if (data == doc.end() || !data->is_array())
    throw ProviderError("embedding response lacks a 'data' array");
  if (data->size() != expected)
    throw ProviderError("embedding response has " + std::to_string(data->size()) +
                        " items for " + std::to_string(expected) + " inputs");
  std::vector<std::vector<double>> out;
  out.reserve(expected);
  for (const auto& item : *data) {
    const auto emb = item.find("embedding");
    if (emb == item.end() || !emb->is_array())
      throw ProviderError("embedding response item lacks an 'embedding' array");
    std::vector<double> values;
    values.reserve(emb->size());
    for (const auto& x : *emb) {
      if (!x.is_number()) throw ProviderError("embedding value is not a number");
      values.push_back(x.get<double>());
    }
    out.push_back(std::move(values));
  }
  return out;
}

}  // namespace

RemoteProvider::RemoteProvider(ProviderConfig config)
    : EmbeddingProvider(std::move(config)) {
  split_url(this->config().endpoint_url);
}

std::vector<std::vector<double>> RemoteProvider::compute(
    std::span<const std::string> texts) {
  const auto& cfg = config();
  const Endpoint endpoint = split_url(cfg.endpoint_url);

  httplib::Headers headers;
  if (!cfg.credential_env.empty()) {
    const char* secret = std::getenv(cfg.credential_env.c_str());
    if (secret == nullptr || *secret == '\0')
      throw ProviderError("credential environment variable '" + cfg.credential_env +
                          "' for provider '" + cfg.provider_id + "' is not set");
    headers.emplace("Authorization", std::string("Bearer ") + secret);
  }

  json request = {{"model", cfg.model}, {"input", json::array()}};
  for (const auto& t : texts) request["input"].push_back(t);
  const std::string payload = request.dump();

  httplib::Client client(endpoint.scheme_host_port);
  client.set_connection_timeout(cfg.request_timeout);
  client.set_read_timeout(cfg.request_timeout);
  client.set_write_timeout(cfg.request_timeout);

  auto backoff = cfg.initial_backoff;
  std::string last_error;
  int last_status = 0;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto res = client.Post(endpoint.path, headers, payload, "application/json");
    if (!res) {
      last_status = 0;
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    last_status = res->status;
    if (res->status == 200) return parse_response(res->body, texts.size());
    last_error = "HTTP status " + std::to_string(res->status);
    if (!retryable_status(res->status))
      throw ProviderError("provider '" + cfg.provider_id + "' request failed: " + last_error,
                          res->status, false);
  }
  throw ProviderError("provider '" + cfg.provider_id + "' failed after " +
                          std::to_string(cfg.max_retries + 1) + " attempts: " + last_error,
                      last_status, true);
}

}  // namespace proofgrade
