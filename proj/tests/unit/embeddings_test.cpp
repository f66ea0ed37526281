#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

#include "fixtures.hpp"
#include "proofgrade/embeddings.hpp"
#include "proofgrade/error.hpp"
#include "proofgrade/mathtext.hpp"
#include "proofgrade/prng.hpp"

using namespace proofgrade;

namespace {

// Wraps the deterministic provider and records every request size.
class CountingProvider final : public EmbeddingProvider {
 public:
  explicit CountingProvider(ProviderConfig cfg) : EmbeddingProvider(cfg), inner_(cfg) {}
  std::vector<std::size_t> request_sizes;
  std::mutex mu;

 protected:
  std::vector<std::vector<double>> compute(std::span<const std::string> texts) override {
    {
      std::lock_guard lock(mu);
      request_sizes.push_back(texts.size());
    }
    return inner_.fetch(texts);
  }

 private:
  DeterministicProvider inner_;
};

// Returns vectors of the wrong length.
class BrokenProvider final : public EmbeddingProvider {
 public:
  using EmbeddingProvider::EmbeddingProvider;

 protected:
  std::vector<std::vector<double>> compute(std::span<const std::string> texts) override {
    return std::vector<std::vector<double>>(texts.size(), std::vector<double>(dim() + 1, 0.5));
  }
};

// Independent bucket computation from the documented recipe.
std::vector<double> oracle_hash_embed(const std::string& text, std::size_t dim,
                                      std::uint64_t seed) {
  std::string seed_bytes(8, '\0');
  for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<char>((seed >> (8 * i)) & 0xff);
  std::map<std::size_t, double> sparse;
  for (const auto& tok : merge_math_tokens(normalize(text)).tokens) {
    std::string compact;
    for (char c : tok.text)
      if (c != ' ' && c != '\n' && c != '\t') compact += c;
    const std::uint64_t h = fnv1a64(seed_bytes + compact);
    sparse[h % dim] += (mix64(h) & 1) ? -1.0 : 1.0;
  }
  std::vector<double> v(dim, 0.0);
  double norm = 0;
  for (auto [k, x] : sparse) {
    v[k] = x;
    norm += x * x;
  }
  if (norm > 0)
    for (double& x : v) x /= std::sqrt(norm);
  return v;
}

std::vector<std::string> sample_texts(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back("Proof " + std::to_string(i) + ": by induction on n, $\\sum_{i=1}^n i$ and g(n-" +
                  std::to_string(i % 13) + ")");
  return out;
}

}  // namespace

TEST(HashEmbed, MatchesRecipe) {
  for (const std::string text : {"proof by induction", "\\sum_{i=1}^n i = n(n+1)/2",
                                  "a a a b", "g(n - 1) and g(n-1)"}) {
    for (std::uint64_t seed : {0ULL, 5ULL}) {
      const auto v = hash_embed(text, 32, seed);
      EXPECT_EQ(v.values, oracle_hash_embed(text, 32, seed)) << text;
    }
  }
}

TEST(HashEmbed, UnitNormOrZero) {
  PortableRng rng(1);
  for (int i = 0; i < 200; ++i) {
    std::string text;
    for (std::uint64_t k = 0, n = rng.bounded(30); k < n; ++k)
      text += "w" + std::to_string(rng.bounded(50)) + " ";
    const auto v = hash_embed(text, 1 + rng.bounded(64), rng.next());
    double norm = 0;
    for (double x : v.values) norm += x * x;
    if (text.empty())
      EXPECT_EQ(norm, 0.0);
    else
      EXPECT_NEAR(norm, 1.0, 1e-12);
  }
}

TEST(HashEmbed, BagOfTokensIgnoresOrderAndSpacing) {
  PortableRng rng(8);
  for (int i = 0; i < 100; ++i) {
    std::vector<std::string> words;
    for (std::uint64_t k = 0, n = 1 + rng.bounded(20); k < n; ++k)
      words.push_back("t" + std::to_string(rng.bounded(10)));
    std::string a, b;
    for (const auto& w : words) a += w + " ";
    shuffle(std::span<std::string>(words), rng);
    for (const auto& w : words) b += "\n" + w + "   ";
    EXPECT_EQ(hash_embed(a, 48, 3).values, hash_embed(b, 48, 3).values);
  }
}

TEST(HashEmbed, SeedChangesLayout) {
  EXPECT_NE(hash_embed("one two three", 64, 0).values, hash_embed("one two three", 64, 1).values);
  EXPECT_THROW(hash_embed("x", 0, 0), Error);
}

TEST(ContentHash, DependsOnProvider) {
  EXPECT_NE(content_hash("a", "text"), content_hash("b", "text"));
  EXPECT_EQ(content_hash("a", "text"), content_hash("a", "text"));
  // Length prefix keeps ("ab","c") and ("a","bc") apart.
  EXPECT_NE(content_hash("ab", "c"), content_hash("a", "bc"));
}

TEST(Embedder, SecondEmbedMakesNoProviderCall) {
  auto cfg = fixture::test_provider(32);
  auto provider = std::make_shared<CountingProvider>(cfg);
  Embedder e(provider, std::make_shared<EmbeddingCache>("test", 32));
  const auto first = e.embed("Proof by induction on $n$.");
  EXPECT_EQ(provider->calls(), 1u);
  const auto second = e.embed("Proof  by induction on $n$.\n");
  EXPECT_EQ(provider->calls(), 1u);
  EXPECT_EQ(first.values, second.values);
  EXPECT_EQ(first.content_hash, second.content_hash);
  EXPECT_THROW(e.embed("  \n "), Error);
}

TEST(Embedder, BatchChunksAndDeduplicates) {
  auto cfg = fixture::test_provider(16);
  cfg.max_batch = 100;
  cfg.max_in_flight = 2;
  auto provider = std::make_shared<CountingProvider>(cfg);
  Embedder e(provider, std::make_shared<EmbeddingCache>("test", 16));
  auto texts = sample_texts(250);
  auto result = e.embed_batch(texts);
  EXPECT_TRUE(result.ok());
  EXPECT_EQ(result.chunks_issued, 3u);
  EXPECT_EQ(result.succeeded, 250u);
  std::sort(provider->request_sizes.begin(), provider->request_sizes.end());
  EXPECT_EQ(provider->request_sizes, (std::vector<std::size_t>{50, 100, 100}));

  // Fully cached now; duplicates inside one batch are sent once.
  auto again = e.embed_batch(texts);
  EXPECT_EQ(again.chunks_issued, 0u);
  EXPECT_EQ(provider->calls(), 3u);
  for (std::size_t i = 0; i < texts.size(); ++i)
    EXPECT_EQ(again.vectors[i]->values, result.vectors[i]->values);

  std::vector<std::string> dup{"fresh text", "fresh text", "other"};
  auto d = e.embed_batch(dup);
  EXPECT_EQ(provider->request_sizes.back(), 2u);
  EXPECT_EQ(d.vectors[0]->values, d.vectors[1]->values);
}

TEST(Embedder, BatchReportsPerItemErrors) {
  auto e = fixture::test_embedder(16);
  std::vector<std::string> texts{"ok one", "   ", "ok two"};
  auto r = e->embed_batch(texts);
  EXPECT_EQ(r.succeeded, 2u);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].index, 1u);
  EXPECT_THROW(e->embed_all(texts), ProviderError);
}

TEST(Embedder, RejectsWrongDimensionFromProvider) {
  auto cfg = fixture::test_provider(8);
  Embedder e(std::make_shared<BrokenProvider>(cfg), std::make_shared<EmbeddingCache>("test", 8));
  EXPECT_THROW(e.embed("anything"), ProviderError);
  std::vector<std::string> texts{"a", "b"};
  auto r = e.embed_batch(texts);
  EXPECT_EQ(r.errors.size(), 2u);
  EXPECT_EQ(e.cache().size(), 0u);
}

TEST(Embedder, CacheMustMatchProvider) {
  auto cfg = fixture::test_provider(8);
  EXPECT_THROW(Embedder(std::make_shared<DeterministicProvider>(cfg),
                        std::make_shared<EmbeddingCache>("test", 9)),
               Error);
  EXPECT_THROW(Embedder(std::make_shared<DeterministicProvider>(cfg),
                        std::make_shared<EmbeddingCache>("other", 8)),
               Error);
}

TEST(Embedder, MergeOnlyWhenFlagged) {
  auto cfg = fixture::test_provider(8);
  Embedder merged = Embedder::from_config(cfg);
  cfg.needs_math_merge = false;
  Embedder raw = Embedder::from_config(cfg);
  EXPECT_EQ(merged.prepare("so g(n - 1) = 2"), "so g(n-1) = 2");
  EXPECT_EQ(raw.prepare("so g(n - 1) = 2"), "so g(n - 1) = 2");
}

TEST(EmbeddingCache, ExportImportBitExact) {
  auto e = fixture::test_embedder(24);
  auto texts = sample_texts(40);
  e->embed_all(texts);
  // Values that do not survive a decimal round trip.
  Digest256 special{};
  special[0] = 0xff;
  std::vector<float> tricky(24);
  for (std::size_t i = 0; i < tricky.size(); ++i)
    tricky[i] = std::nextafter(static_cast<float>(i) / 3.0f, 1e9f) * (i % 2 ? -1.0f : 1.0f);
  tricky[5] = std::numeric_limits<float>::denorm_min();
  tricky[6] = -0.0f;
  e->cache().insert(special, tricky);

  std::stringstream buf;
  EXPECT_EQ(e->cache().export_to(buf), 41u);
  const std::string bytes = buf.str();
  EmbeddingCache copy("test", 24);
  std::istringstream in(bytes);
  EXPECT_EQ(copy.import_from(in), 41u);
  ASSERT_EQ(copy.size(), 41u);

  auto got = copy.find(special);
  ASSERT_TRUE(got);
  EXPECT_EQ(std::memcmp(got->data(), tricky.data(), tricky.size() * sizeof(float)), 0);

  std::ostringstream again;
  copy.export_to(again);
  EXPECT_EQ(again.str(), bytes);

  // An embedder on the imported cache never calls its provider.
  auto provider = std::make_shared<CountingProvider>(fixture::test_provider(24));
  Embedder warm(provider, std::make_shared<EmbeddingCache>("test", 24));
  std::istringstream in2(bytes);
  warm.cache().import_from(in2);
  auto vs = warm.embed_all(texts);
  EXPECT_EQ(provider->calls(), 0u);
  auto fresh = e->embed_all(texts);
  for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_EQ(vs[i].values, fresh[i].values);
}

TEST(EmbeddingCache, ImportRejectsMismatchAndCorruption) {
  auto e = fixture::test_embedder(8);
  auto texts = sample_texts(3);
  e->embed_all(texts);
  std::stringstream buf;
  e->cache().export_to(buf);
  const std::string bytes = buf.str();

  auto kind = [](EmbeddingCache& c, const std::string& data) {
    std::istringstream in(data);
    try {
      c.import_from(in);
    } catch (const Error& err) {
      return err.kind();
    }
    return ErrorKind::Input;
  };
  EmbeddingCache wrong_dim("test", 9);
  EXPECT_EQ(kind(wrong_dim, bytes), ErrorKind::Conflict);
  EmbeddingCache wrong_id("other", 8);
  EXPECT_EQ(kind(wrong_id, bytes), ErrorKind::Conflict);
  EmbeddingCache ok("test", 8);
  EXPECT_EQ(kind(ok, bytes.substr(0, bytes.size() - 3)), ErrorKind::Format);
  EXPECT_EQ(kind(ok, "XXXX" + bytes.substr(4)), ErrorKind::Format);

  EXPECT_THROW(ok.insert(Digest256{}, std::vector<float>(7)), Error);
  std::vector<float> nan(8, 0.0f);
  nan[2] = std::nanf("");
  EXPECT_THROW(ok.insert(Digest256{}, nan), Error);
}

TEST(EmbeddingCache, FileImportProviderServesOnlyImported) {
  fixture::TempDir dir;
  auto e = fixture::test_embedder(8);
  auto texts = sample_texts(5);
  auto vs = e->embed_all(texts);
  e->cache().export_to(dir / "test.pgec");

  ProviderConfig cfg;
  cfg.provider_id = "test";
  cfg.kind = ProviderKind::FileImport;
  cfg.dim = 8;
  cfg.needs_math_merge = true;
  cfg.import_path = dir / "test.pgec";
  Embedder imported = Embedder::from_config(cfg);
  auto got = imported.embed_all(texts);
  for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_EQ(got[i].values, vs[i].values);
  EXPECT_THROW(imported.embed("never seen"), ProviderError);
}

TEST(ProviderConfig, Validation) {
  ProviderConfig c = fixture::test_provider(8);
  EXPECT_NO_THROW(c.validate());
  c.dim = 0;
  EXPECT_THROW(c.validate(), Error);
  c = fixture::test_provider(8);
  c.kind = ProviderKind::RemoteEndpoint;
  EXPECT_THROW(c.validate(), Error);
  c.kind = ProviderKind::FileImport;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_EQ(parse_provider_kind("remote-endpoint"), ProviderKind::RemoteEndpoint);
  EXPECT_THROW(parse_provider_kind("gpu"), Error);
}
