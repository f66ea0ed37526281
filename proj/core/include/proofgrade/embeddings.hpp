#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "proofgrade/digest.hpp"

namespace proofgrade {

struct EmbeddingVector {
  std::vector<double> values;
  std::string provider_id;
  Digest256 content_hash{};

  std::size_t dim() const noexcept { return values.size(); }
};

enum class ProviderKind { RemoteEndpoint, DeterministicTest, FileImport };

std::string_view to_string(ProviderKind kind) noexcept;
ProviderKind parse_provider_kind(std::string_view text);

struct ProviderConfig {
  std::string provider_id;
  ProviderKind kind = ProviderKind::DeterministicTest;
  std::size_t dim = 0;
  bool needs_math_merge = false;
  std::size_t max_batch = 64;
  std::size_t max_in_flight = 4;

  // remote-endpoint
  std::string endpoint_url;
  std::string model;
  std::string credential_env;
  int max_retries = 5;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds request_timeout{60};

  // deterministic-test
  std::uint64_t seed = 0;

  // file-import
  std::filesystem::path import_path;

  /// Throws Error(Config) when the invariants (dim > 0, endpoint for remote,
  /// import path for file-import, max_batch >= 1) do not hold.
  void validate() const;
};

/// Token-level feature hashing into `dim` signed buckets, L2-normalised.
///
/// The text is normalised and split with merge_math_tokens; each token is
/// compacted (interior whitespace removed) and hashed as
///   h      = FNV-1a-64( seed as 8 little-endian bytes || token bytes )
///   bucket = h mod dim
///   sign   = +1 if (mix64(h) & 1) == 0 else -1
/// Bucket sums are divided by their Euclidean norm. Text without tokens maps
/// to the zero vector.
EmbeddingVector hash_embed(std::string_view text, std::size_t dim,
                           std::uint64_t seed);

/// SHA-256 over (u32 little-endian byte length of provider_id ||
/// provider_id || normalised text).
Digest256 content_hash(std::string_view provider_id,
                       std::string_view normalized_text);

/// Computes embeddings for already-prepared texts. `fetch` counts one call
/// per request so cache behaviour is observable.
class EmbeddingProvider {
 public:
  explicit EmbeddingProvider(ProviderConfig config);
  virtual ~EmbeddingProvider() = default;

  EmbeddingProvider(const EmbeddingProvider&) = delete;
  EmbeddingProvider& operator=(const EmbeddingProvider&) = delete;

  const ProviderConfig& config() const noexcept { return config_; }
  const std::string& id() const noexcept { return config_.provider_id; }
  std::size_t dim() const noexcept { return config_.dim; }

  std::vector<std::vector<double>> fetch(std::span<const std::string> texts);

  std::size_t calls() const noexcept { return calls_.load(); }

 protected:
  virtual std::vector<std::vector<double>> compute(
      std::span<const std::string> texts) = 0;

 private:
  ProviderConfig config_;
  std::atomic<std::size_t> calls_{0};
};

class DeterministicProvider final : public EmbeddingProvider {
 public:
  explicit DeterministicProvider(ProviderConfig config);

 protected:
  std::vector<std::vector<double>> compute(
      std::span<const std::string> texts) override;
};

/// Serves only what was imported into the cache; any miss is an error.
class ImportedProvider final : public EmbeddingProvider {
 public:
  explicit ImportedProvider(ProviderConfig config);

 protected:
  std::vector<std::vector<double>> compute(
      std::span<const std::string> texts) override;
};

/// POSTs {"model": ..., "input": [...]} and reads
/// {"data": [{"embedding": [...]}, ...]}. Transport errors, 429 and 5xx are
/// retried with exponential backoff; other statuses fail immediately.
class RemoteProvider final : public EmbeddingProvider {
 public:
  explicit RemoteProvider(ProviderConfig config);

 protected:
  std::vector<std::vector<double>> compute(
      std::span<const std::string> texts) override;
};

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config);

/// Content-addressed store of float32 vectors for one provider. Concurrent
/// readers, serialized writers.
///
/// File layout (all integers little-endian):
///   "PGEC" | u16 version | u32 len + provider_id bytes | u32 dim |
///   u64 count | count x (32-byte hash | dim x f32)
/// Entries are written in ascending hash order.
class EmbeddingCache {
 public:
  static constexpr std::uint16_t kFormatVersion = 1;

  EmbeddingCache(std::string provider_id, std::size_t dim);

  const std::string& provider_id() const noexcept { return provider_id_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const;

  std::optional<std::vector<float>> find(const Digest256& key) const;

  /// Rejects wrong dimension and non-finite values.
  void insert(const Digest256& key, std::vector<float> values);

  std::size_t export_to(std::ostream& out) const;
  std::size_t export_to(const std::filesystem::path& path) const;

  /// Merges a cache file into this cache; imported entries replace existing
  /// ones with the same key. Throws Error(Format) with the byte offset on
  /// corruption and Error(Conflict) on a provider or dimension mismatch.
  std::size_t import_from(std::istream& in);
  std::size_t import_from(const std::filesystem::path& path);

 private:
  std::string provider_id_;
  std::size_t dim_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<Digest256, std::vector<float>, Digest256Hash> entries_;
};

/// Per-item outcome of a batch embedding request.
struct BatchResult {
  struct ItemError {
    std::size_t index;
    std::string message;
  };

  std::vector<std::optional<EmbeddingVector>> vectors;
  std::vector<ItemError> errors;
  std::size_t succeeded = 0;
  std::size_t chunks_issued = 0;

  bool ok() const noexcept { return errors.empty(); }
};

/// The normalise -> (merge) -> cache -> provider pipeline.
class Embedder {
 public:
  Embedder(std::shared_ptr<EmbeddingProvider> provider,
           std::shared_ptr<EmbeddingCache> cache);

  /// Creates a provider and an empty cache; for file-import providers the
  /// configured file is loaded into the cache.
  static Embedder from_config(const ProviderConfig& config);

  const EmbeddingProvider& provider() const noexcept { return *provider_; }
  EmbeddingCache& cache() noexcept { return *cache_; }
  const EmbeddingCache& cache() const noexcept { return *cache_; }

  /// Text actually sent to the provider for a normalised body.
  std::string prepare(std::string_view normalized_text) const;

  /// Throws Error(Input) for text that is blank after normalisation, and
  /// propagates provider failures.
  EmbeddingVector embed(std::string_view text);

  /// Order-preserving. Cache misses are sent in chunks of at most
  /// max_batch texts with at most max_in_flight chunks outstanding.
  BatchResult embed_batch(std::span<const std::string> texts);

  /// embed_batch that throws if any item failed.
  std::vector<EmbeddingVector> embed_all(std::span<const std::string> texts);

 private:
  std::shared_ptr<EmbeddingProvider> provider_;
  std::shared_ptr<EmbeddingCache> cache_;
};

}  // namespace proofgrade
