#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "proofgrade/config.hpp"

namespace proofgrade::cli {

namespace fs = std::filesystem;

struct Common {
  fs::path config_path;
  std::vector<std::string> argv;
  fs::path manifest;
  AppConfig config;
};

struct IngestArgs {
  fs::path corpus;
  fs::path problems;
  fs::path out;
  fs::path split_out;
  std::optional<std::uint64_t> seed;
};

struct EmbedArgs {
  fs::path corpus;
  std::string provider;
  fs::path cache_dir;
  fs::path export_path;
  fs::path import_path;
};

struct TrainArgs {
  fs::path corpus;
  std::string problem;
  std::string provider;
  std::optional<std::uint64_t> seed;
  fs::path split;
  fs::path out;
  fs::path report;
  fs::path cache_dir;
  std::vector<int> epochs;
  std::string selection;
  std::optional<unsigned> threads;
};

struct EvalArgs {
  fs::path model;
  fs::path corpus;
  fs::path split;
  std::optional<std::uint64_t> seed;
  std::string set = "test";
  fs::path out;
  fs::path cache_dir;
};

struct SweepArgs {
  fs::path corpus;
  std::string problem;
  std::string provider;
  std::optional<std::uint64_t> seed;
  double test_frac = 0.30;
  fs::path out;
  fs::path cache_dir;
  std::optional<unsigned> threads;
};

struct GradeArgs {
  fs::path model;
  fs::path in;
  std::string strategy = "First";
  std::string student = "cli";
  fs::path catalog;
  bool json = false;
  fs::path cache_dir;
};

struct ServeArgs {
  std::optional<std::string> host;
  std::optional<int> port;
  fs::path problems;
  fs::path models;
  fs::path catalog;
  fs::path log;
  fs::path webui;
  fs::path roster;
  std::string provider;
  std::optional<std::uint32_t> max_attempts;
  fs::path cache_dir;
};

struct StatsArgs {
  fs::path log;
  fs::path survey;
  fs::path out;
  std::size_t min_chars = 20;
  bool paired = false;
  std::vector<std::string> negative;
};

struct SynthArgs {
  std::size_t records = 1000;
  std::string problem = "P1";
  std::uint64_t seed = 0;
  std::size_t filler = 20;
  std::size_t repeats = 3;
  std::string provider = "test";
  fs::path out;
};

int run_ingest(const Common& c, const IngestArgs& a);
int run_embed(const Common& c, const EmbedArgs& a);
int run_train(const Common& c, const TrainArgs& a);
int run_eval(const Common& c, const EvalArgs& a);
int run_sweep(const Common& c, const SweepArgs& a);
int run_grade(const Common& c, const GradeArgs& a);
int run_serve(const Common& c, const ServeArgs& a);
int run_stats(const Common& c, const StatsArgs& a);
int run_synth(const Common& c, const SynthArgs& a);

}  // namespace proofgrade::cli
