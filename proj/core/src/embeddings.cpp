#include "proofgrade/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <future>
#include <unordered_map>

#include "proofgrade/corpus.hpp"
#include "proofgrade/error.hpp"
#include "proofgrade/mathtext.hpp"
#include "proofgrade/prng.hpp"

namespace proofgrade {
namespace {

std::string le_bytes(std::uint64_t v) {
  std::string out(8, '\0');
  for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
  return out;
}

// Rounds through float32, which is what the cache stores, so a fresh
// result and a later cache hit are identical.
std::vector<float> to_float32(const std::vector<double>& values) {
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = static_cast<float>(values[i]);
  return out;
}

EmbeddingVector make_vector(const std::vector<float>& values,
                            const std::string& provider_id,
                            const Digest256& key) {
  EmbeddingVector v;
  v.values.assign(values.begin(), values.end());
  v.provider_id = provider_id;
  v.content_hash = key;
  return v;
}

void check_result(const std::vector<double>& values, std::size_t dim,
                  const std::string& provider_id) {
  if (values.size() != dim)
    throw ProviderError("provider '" + provider_id + "' returned dimension " +
                        std::to_string(values.size()) + ", expected " +
                        std::to_string(dim));
  for (double x : values)
    if (!std::isfinite(x))
      throw ProviderError("provider '" + provider_id +
                          "' returned a non-finite embedding value");
}

}  // namespace

std::string_view to_string(ProviderKind kind) noexcept {
  switch (kind) {
    case ProviderKind::RemoteEndpoint: return "remote-endpoint";
    case ProviderKind::DeterministicTest: return "deterministic-test";
    case ProviderKind::FileImport: return "file-import";
  }
  return "unknown";
}

ProviderKind parse_provider_kind(std::string_view text) {
  if (text == "remote-endpoint") return ProviderKind::RemoteEndpoint;
  if (text == "deterministic-test") return ProviderKind::DeterministicTest;
  if (text == "file-import") return ProviderKind::FileImport;
  throw Error(ErrorKind::Config, "unknown provider kind '" + std::string(text) +
                                     "' (expected remote-endpoint, "
                                     "deterministic-test or file-import)");
}

void ProviderConfig::validate() const {
  const std::string who = "provider '" + provider_id + "': ";
  if (provider_id.empty()) throw Error(ErrorKind::Config, "provider id is empty");
  if (dim == 0) throw Error(ErrorKind::Config, who + "dim must be positive");
  if (max_batch == 0)
    throw Error(ErrorKind::Config, who + "max_batch must be at least 1");
  if (max_in_flight == 0)
    throw Error(ErrorKind::Config, who + "max_in_flight must be at least 1");
  if (max_retries < 0)
    throw Error(ErrorKind::Config, who + "max_retries must be nonnegative");
  if (kind == ProviderKind::RemoteEndpoint && endpoint_url.empty())
    throw Error(ErrorKind::Config, who + "remote-endpoint requires an endpoint URL");
  if (kind == ProviderKind::FileImport && import_path.empty())
    throw Error(ErrorKind::Config, who + "file-import requires an import path");
}

EmbeddingVector hash_embed(std::string_view text, std::size_t dim,
                           std::uint64_t seed) {
  if (dim == 0) throw Error(ErrorKind::Input, "hash_embed: dim must be positive");
  const std::string normalized = normalize(text);
  const TokenSequence tokens = merge_math_tokens(normalized);

  const std::string seed_bytes = le_bytes(seed);
  const std::uint64_t basis = fnv1a64(seed_bytes);
  std::vector<double> buckets(dim, 0.0);
  for (const auto& tok : tokens.tokens) {
    const std::uint64_t h = fnv1a64(compact_token(tok.text), basis);
    const double sign = (mix64(h) & 1) == 0 ? 1.0 : -1.0;
    buckets[h % dim] += sign;
  }

  double norm_sq = 0.0;
  for (double b : buckets) norm_sq += b * b;
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& b : buckets) b *= inv;
  }

  EmbeddingVector out;
  out.values = std::move(buckets);
  out.provider_id = "hash-embed";
  out.content_hash = content_hash(out.provider_id, normalized);
  return out;
}

Digest256 content_hash(std::string_view provider_id,
                       std::string_view normalized_text) {
  std::string buf;
  buf.reserve(4 + provider_id.size() + normalized_text.size());
  const auto len = static_cast<std::uint32_t>(provider_id.size());
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
  buf.append(provider_id);
  buf.append(normalized_text);
  return sha256(buf);
}

EmbeddingProvider::EmbeddingProvider(ProviderConfig config)
    : config_(std::move(config)) {
  config_.validate();
}

std::vector<std::vector<double>> EmbeddingProvider::fetch(
    std::span<const std::string> texts) {
  ++calls_;
  return compute(texts);
}

DeterministicProvider::DeterministicProvider(ProviderConfig config)
    : EmbeddingProvider(std::move(config)) {}

std::vector<std::vector<double>> DeterministicProvider::compute(
    std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts)
    out.push_back(hash_embed(t, config().dim, config().seed).values);
  return out;
}

ImportedProvider::ImportedProvider(ProviderConfig config)
    : EmbeddingProvider(std::move(config)) {}

std::vector<std::vector<double>> ImportedProvider::compute(
    std::span<const std::string> texts) {
  throw ProviderError("provider '" + id() + "' has no imported embedding for " +
                      std::to_string(texts.size()) + " text(s)");
}

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config) {
  switch (config.kind) {
    case ProviderKind::DeterministicTest:
      return std::make_unique<DeterministicProvider>(config);
    case ProviderKind::FileImport:
      return std::make_unique<ImportedProvider>(config);
    case ProviderKind::RemoteEndpoint:
      return std::make_unique<RemoteProvider>(config);
  }
  throw Error(ErrorKind::Config, "unsupported provider kind");
}

Embedder::Embedder(std::shared_ptr<EmbeddingProvider> provider,
                   std::shared_ptr<EmbeddingCache> cache)
    : provider_(std::move(provider)), cache_(std::move(cache)) {
  if (!provider_ || !cache_)
    throw Error(ErrorKind::Input, "Embedder requires a provider and a cache");
  if (cache_->provider_id() != provider_->id() || cache_->dim() != provider_->dim())
    throw Error(ErrorKind::Conflict, "cache for '" + cache_->provider_id() +
                                         "' does not match provider '" +
                                         provider_->id() + "'");
}

Embedder Embedder::from_config(const ProviderConfig& config) {
  auto provider = std::shared_ptr<EmbeddingProvider>(make_provider(config));
  auto cache = std::make_shared<EmbeddingCache>(config.provider_id, config.dim);
  if (config.kind == ProviderKind::FileImport) cache->import_from(config.import_path);
  return Embedder(std::move(provider), std::move(cache));
}

std::string Embedder::prepare(std::string_view normalized_text) const {
  if (!provider_->config().needs_math_merge) return std::string(normalized_text);
  return merged_text(merge_math_tokens(normalized_text));
}

EmbeddingVector Embedder::embed(std::string_view text) {
  const std::string normalized = normalize(text);
  if (normalized.empty())
    throw Error(ErrorKind::Input, "cannot embed empty text");
  const Digest256 key = content_hash(provider_->id(), normalized);
  if (auto hit = cache_->find(key)) return make_vector(*hit, provider_->id(), key);

  const std::string prepared = prepare(normalized);
  auto result = provider_->fetch(std::span<const std::string>(&prepared, 1));
  if (result.size() != 1)
    throw ProviderError("provider '" + provider_->id() + "' returned " +
                        std::to_string(result.size()) + " vectors for 1 input");
  check_result(result.front(), provider_->dim(), provider_->id());
  auto stored = to_float32(result.front());
  auto out = make_vector(stored, provider_->id(), key);
  cache_->insert(key, std::move(stored));
  return out;
}

BatchResult Embedder::embed_batch(std::span<const std::string> texts) {
  BatchResult result;
  result.vectors.resize(texts.size());

  struct Miss {
    Digest256 key;
    std::string prepared;
    std::vector<std::size_t> indices;
  };
  std::vector<Miss> misses;
  std::unordered_map<Digest256, std::size_t, Digest256Hash> miss_slot;

  for (std::size_t i = 0; i < texts.size(); ++i) {
    const std::string normalized = normalize(texts[i]);
    if (normalized.empty()) {
      result.errors.push_back({i, "cannot embed empty text"});
      continue;
    }
    const Digest256 key = content_hash(provider_->id(), normalized);
    if (auto hit = cache_->find(key)) {
      result.vectors[i] = make_vector(*hit, provider_->id(), key);
      continue;
    }
    auto [it, fresh] = miss_slot.emplace(key, misses.size());
    if (fresh) misses.push_back(Miss{key, prepare(normalized), {}});
    misses[it->second].indices.push_back(i);
  }

  const auto& cfg = provider_->config();
  const std::size_t chunk_size = cfg.max_batch;
  const std::size_t n_chunks = (misses.size() + chunk_size - 1) / chunk_size;
  result.chunks_issued = n_chunks;

  auto run_chunk = [&](std::size_t c) {
    const std::size_t lo = c * chunk_size;
    const std::size_t hi = std::min(misses.size(), lo + chunk_size);
    std::vector<std::string> batch;
    batch.reserve(hi - lo);
    for (std::size_t m = lo; m < hi; ++m) batch.push_back(misses[m].prepared);
    auto vectors = provider_->fetch(batch);
    if (vectors.size() != batch.size())
      throw ProviderError("provider '" + provider_->id() + "' returned " +
                          std::to_string(vectors.size()) + " vectors for " +
                          std::to_string(batch.size()) + " inputs");
    return vectors;
  };

  auto absorb = [&](std::size_t c, std::vector<std::vector<double>> vectors,
                    const std::string* failure) {
    const std::size_t lo = c * chunk_size;
    const std::size_t hi = std::min(misses.size(), lo + chunk_size);
    for (std::size_t m = lo; m < hi; ++m) {
      const Miss& miss = misses[m];
      std::string error = failure ? *failure : std::string();
      if (!failure) {
        try {
          check_result(vectors[m - lo], provider_->dim(), provider_->id());
          auto stored = to_float32(vectors[m - lo]);
          for (std::size_t idx : miss.indices)
            result.vectors[idx] = make_vector(stored, provider_->id(), miss.key);
          cache_->insert(miss.key, std::move(stored));
        } catch (const std::exception& e) {
          error = e.what();
        }
      }
      if (!error.empty())
        for (std::size_t idx : miss.indices) result.errors.push_back({idx, error});
    }
  };

  const std::size_t in_flight = std::max<std::size_t>(1, cfg.max_in_flight);
  for (std::size_t wave = 0; wave < n_chunks; wave += in_flight) {
    const std::size_t wave_end = std::min(n_chunks, wave + in_flight);
    std::vector<std::future<std::vector<std::vector<double>>>> pending;
    for (std::size_t c = wave; c < wave_end; ++c)
      pending.push_back(std::async(wave_end - wave > 1 ? std::launch::async
                                                       : std::launch::deferred,
                                   run_chunk, c));
    for (std::size_t c = wave; c < wave_end; ++c) {
      try {
        absorb(c, pending[c - wave].get(), nullptr);
      } catch (const std::exception& e) {
        const std::string message = e.what();
        absorb(c, {}, &message);
      }
    }
  }

  std::sort(result.errors.begin(), result.errors.end(),
            [](const auto& a, const auto& b) { return a.index < b.index; });
  for (const auto& v : result.vectors)
    if (v) ++result.succeeded;
  return result;
}

std::vector<EmbeddingVector> Embedder::embed_all(std::span<const std::string> texts) {
  BatchResult batch = embed_batch(texts);
  if (!batch.ok()) {
    const auto& first = batch.errors.front();
    throw ProviderError(std::to_string(batch.errors.size()) + " of " +
                        std::to_string(texts.size()) +
                        " embeddings failed (" + std::to_string(batch.succeeded) +
                        " succeeded); first failure at item " +
                        std::to_string(first.index) + ": " + first.message);
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (auto& v : batch.vectors) out.push_back(std::move(*v));
  return out;
}

}  // namespace proofgrade
