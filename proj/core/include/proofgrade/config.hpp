#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "proofgrade/corpus.hpp"
#include "proofgrade/embeddings.hpp"
#include "proofgrade/grader.hpp"

namespace proofgrade {

struct PathsConfig {
  std::filesystem::path corpus;
  std::filesystem::path problems;
  std::filesystem::path models;
  std::filesystem::path cache_dir;
  std::filesystem::path catalog;
  std::filesystem::path attempt_log;
  std::filesystem::path webui;
  std::filesystem::path output;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string provider;
  /// 0 means unlimited.
  std::uint32_t max_attempts = 0;
  std::size_t max_body_bytes = 64 * 1024;
  /// Optional CSV student_id,group.
  std::filesystem::path roster;
  unsigned threads = 8;
};

struct AppConfig {
  std::map<std::string, ProviderConfig, std::less<>> providers;
  TrainConfig training;
  SplitFractions fractions;
  PathsConfig paths;
  ServerConfig server;

  /// Throws Error(Config) when `id` is not configured.
  const ProviderConfig& provider(std::string_view id) const;
};

/// Always-present deterministic provider "test" (dim 256, seed 0, math merge on).
ProviderConfig builtin_test_provider();

/// Configuration with only built-in defaults.
AppConfig default_config();

/// INI-style text: `[section]` headers, `key = value` lines, `#` or `;`
/// comments. Sections: [providers] with keys `<id>.<field>`, [training],
/// [paths], [server]. Relative paths resolve against `base_dir`. Errors
/// carry `source:line`.
AppConfig parse_config(std::istream& in, std::string_view source_name,
                       const std::filesystem::path& base_dir = {});
AppConfig load_config(const std::filesystem::path& path);

/// Stable text rendering of the effective configuration (for run manifests).
std::string describe_config(const AppConfig& config);

}  // namespace proofgrade
