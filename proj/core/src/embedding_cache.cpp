#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>

#include "proofgrade/embeddings.hpp"
#include "proofgrade/error.hpp"

namespace proofgrade {
namespace {

constexpr char kMagic[4] = {'P', 'G', 'E', 'C'};

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint64_t offset() const noexcept { return offset_; }

  void read(void* dst, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw Error(ErrorKind::Format, "embedding cache truncated at offset " +
                                         std::to_string(offset_ + in_.gcount()) +
                                         " while reading " + what);
    offset_ += n;
  }

  template <typename T>
  T get_le(const char* what) {
    unsigned char buf[sizeof(T)];
    read(buf, sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
  }

 private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
};

}  // namespace

EmbeddingCache::EmbeddingCache(std::string provider_id, std::size_t dim)
    : provider_id_(std::move(provider_id)), dim_(dim) {
  if (dim_ == 0) throw Error(ErrorKind::Input, "embedding cache dim must be positive");
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::optional<std::vector<float>> EmbeddingCache::find(const Digest256& key) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::insert(const Digest256& key, std::vector<float> values) {
  if (values.size() != dim_)
    throw Error(ErrorKind::Conflict, "embedding dimension " + std::to_string(values.size()) +
                                         " does not match cache dimension " +
                                         std::to_string(dim_));
  for (float v : values)
    if (!std::isfinite(v))
      throw Error(ErrorKind::Input, "refusing to cache a non-finite embedding");
  std::unique_lock lock(mutex_);
  entries_[key] = std::move(values);
}

std::size_t EmbeddingCache::export_to(std::ostream& out) const {
  std::shared_lock lock(mutex_);
  std::vector<const std::pair<const Digest256, std::vector<float>>*> sorted;
  sorted.reserve(entries_.size());
  for (const auto& kv : entries_) sorted.push_back(&kv);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->first < b->first; });

  out.write(kMagic, sizeof kMagic);
  put_le<std::uint16_t>(out, kFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(provider_id_.size()));
  out.write(provider_id_.data(), static_cast<std::streamsize>(provider_id_.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  put_le<std::uint64_t>(out, sorted.size());
  for (const auto* kv : sorted) {
    out.write(reinterpret_cast<const char*>(kv->first.data()), 32);
    for (float v : kv->second) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out) throw Error(ErrorKind::Format, "failed to write embedding cache");
  return sorted.size();
}

std::size_t EmbeddingCache::export_to(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Input, "cannot write " + path.string());
  return export_to(out);
}

std::size_t EmbeddingCache::import_from(std::istream& in) {
  Reader r(in);
  char magic[4];
  r.read(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw Error(ErrorKind::Format, "embedding cache: bad magic at offset 0");
  const auto version_offset = r.offset();
  const auto version = r.get_le<std::uint16_t>("version");
  if (version != kFormatVersion)
    throw Error(ErrorKind::Format, "embedding cache: unsupported version " +
                                       std::to_string(version) + " at offset " +
                                       std::to_string(version_offset));
  const auto id_len = r.get_le<std::uint32_t>("provider id length");
  if (id_len > (1u << 20))
    throw Error(ErrorKind::Format, "embedding cache: implausible provider id length at offset " +
                                       std::to_string(r.offset() - 4));
  std::string provider(id_len, '\0');
  r.read(provider.data(), id_len, "provider id");
  const auto dim = r.get_le<std::uint32_t>("dim");
  const auto count = r.get_le<std::uint64_t>("entry count");

  if (provider != provider_id_)
    throw Error(ErrorKind::Conflict, "embedding cache file is for provider '" + provider +
                                         "', not '" + provider_id_ + "'");
  if (dim != dim_)
    throw Error(ErrorKind::Conflict, "embedding cache file has dim " + std::to_string(dim) +
                                         " but provider '" + provider_id_ + "' has dim " +
                                         std::to_string(dim_));

  std::vector<std::pair<Digest256, std::vector<float>>> loaded;
  for (std::uint64_t e = 0; e < count; ++e) {
    Digest256 key;
    r.read(key.data(), key.size(), "entry hash");
    std::vector<float> values(dim);
    for (auto& v : values) {
      const auto at = r.offset();
      v = std::bit_cast<float>(r.get_le<std::uint32_t>("entry values"));
      if (!std::isfinite(v))
        throw Error(ErrorKind::Format, "embedding cache: non-finite value at offset " +
                                           std::to_string(at));
    }
    loaded.emplace_back(key, std::move(values));
  }

  std::unique_lock lock(mutex_);
  for (auto& [key, values] : loaded) entries_[key] = std::move(values);
  return loaded.size();
}

std::size_t EmbeddingCache::import_from(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::NotFound, "embedding cache not found: " + path.string());
  return import_from(in);
}

}  // namespace proofgrade
