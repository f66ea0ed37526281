#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace proofgrade::cli {

// Reproducibility record written next to every artifact a command produces.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv);

  void set_config(std::string text) { config_ = std::move(text); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void note(std::string key, std::string value);

  // Starts/stops a named timing; nested phases are allowed.
  void start(const std::string& phase);
  void stop(const std::string& phase);

  // Writes <first output>.manifest.json unless `path` is given.
  std::filesystem::path write(const std::filesystem::path& path = {}) const;

 private:
  struct Timing {
    std::string phase;
    std::chrono::steady_clock::time_point begin;
    double ms = -1.0;
  };

  std::string command_;
  std::vector<std::string> argv_;
  std::string config_;
  std::uint64_t seed_ = 0;
  std::vector<std::filesystem::path> inputs_;
  std::vector<std::filesystem::path> outputs_;
  std::vector<std::pair<std::string, std::string>> notes_;
  std::vector<Timing> timings_;
};

}  // namespace proofgrade::cli
