#include <fmt/format.h>

#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "proofgrade/error.hpp"

namespace {

using namespace proofgrade;
using namespace proofgrade::cli;

// Exit codes by error category. 2 is CLI11's usage error.
int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Input: return 3;
    case ErrorKind::Format: return 4;
    case ErrorKind::Config: return 5;
    case ErrorKind::Provider: return 6;
    case ErrorKind::Training: return 7;
    case ErrorKind::Statistics: return 8;
    case ErrorKind::NotFound: return 9;
    case ErrorKind::Conflict: return 10;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rubric-based grading of induction proofs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "proofgrade 0.1.0");

  Common common;
  for (int i = 0; i < argc; ++i) common.argv.emplace_back(argv[i]);
  app.add_option("-c,--config", common.config_path, "Configuration file (INI)")
      ->check(CLI::ExistingFile);
  app.add_option("--manifest", common.manifest, "Where to write the run manifest");

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate a corpus, drop empty proofs, write splits");
  ingest_cmd->add_option("--corpus", ingest.corpus, "Input corpus (JSONL)");
  ingest_cmd->add_option("--problems", ingest.problems, "Problems file to check ids against");
  ingest_cmd->add_option("-o,--out", ingest.out, "Cleaned corpus output");
  ingest_cmd->add_option("--split-out", ingest.split_out, "Per-problem split file (JSON)");
  ingest_cmd->add_option("--seed", ingest.seed, "Split seed");

  EmbedArgs embed;
  auto* embed_cmd = app.add_subcommand("embed", "Fill the embedding cache for a corpus");
  embed_cmd->add_option("--corpus", embed.corpus, "Corpus to embed");
  embed_cmd->add_option("--provider", embed.provider, "Provider id");
  embed_cmd->add_option("--cache-dir", embed.cache_dir, "Cache directory");
  embed_cmd->add_option("--export", embed.export_path, "Write the cache to this file");
  embed_cmd->add_option("--import", embed.import_path, "Merge this cache file first")
      ->check(CLI::ExistingFile);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the seven rubric models of one problem");
  train_cmd->add_option("--corpus", train.corpus, "Corpus (JSONL)");
  train_cmd->add_option("--problem", train.problem, "Problem id")->required();
  train_cmd->add_option("--provider", train.provider, "Provider id");
  train_cmd->add_option("--seed", train.seed, "Split and training seed");
  train_cmd->add_option("--split", train.split, "Split file from ingest");
  train_cmd->add_option("-o,--out", train.out, "Model file");
  train_cmd->add_option("--report", train.report, "Epoch selection report (JSON)");
  train_cmd->add_option("--cache-dir", train.cache_dir, "Cache directory");
  train_cmd->add_option("--epochs", train.epochs, "Epoch grid")->delimiter(',');
  train_cmd->add_option("--selection", train.selection, "validation or test");
  train_cmd->add_option("--threads", train.threads, "Rubric models trained concurrently");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a held-out set");
  eval_cmd->add_option("--model", eval.model, "Model file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--corpus", eval.corpus, "Corpus (JSONL)");
  eval_cmd->add_option("--split", eval.split, "Split file from ingest");
  eval_cmd->add_option("--seed", eval.seed, "Split seed when no split file is given");
  eval_cmd->add_option("--set", eval.set, "test, validation or all");
  eval_cmd->add_option("-o,--out", eval.out, "Metrics CSV");
  eval_cmd->add_option("--cache-dir", eval.cache_dir, "Cache directory");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Accuracy against training-set size");
  sweep_cmd->add_option("--corpus", sweep.corpus, "Corpus (JSONL)");
  sweep_cmd->add_option("--problem", sweep.problem, "Problem id")->required();
  sweep_cmd->add_option("--provider", sweep.provider, "Provider id");
  sweep_cmd->add_option("--seed", sweep.seed, "Seed");
  sweep_cmd->add_option("--test-frac", sweep.test_frac, "Fixed test fraction");
  sweep_cmd->add_option("-o,--out", sweep.out, "Sweep CSV");
  sweep_cmd->add_option("--cache-dir", sweep.cache_dir, "Cache directory");
  sweep_cmd->add_option("--threads", sweep.threads, "Rubric models trained concurrently");

  GradeArgs grade;
  auto* grade_cmd = app.add_subcommand("grade", "Grade one proof");
  grade_cmd->add_option("--model", grade.model, "Model file")->required()->check(CLI::ExistingFile);
  grade_cmd->add_option("--in", grade.in, "Proof file, or - for stdin")->required();
  grade_cmd->add_option("--strategy", grade.strategy, "SelfEval, First or Random");
  grade_cmd->add_option("--student", grade.student, "Student id (seeds the Random strategy)");
  grade_cmd->add_option("--catalog", grade.catalog, "Feedback catalog (JSON)");
  grade_cmd->add_flag("--json", grade.json, "Print JSON");
  grade_cmd->add_option("--cache-dir", grade.cache_dir, "Cache directory");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the grading service");
  serve_cmd->add_option("--host", serve.host, "Bind address");
  serve_cmd->add_option("--port", serve.port, "Port (0 picks one)");
  serve_cmd->add_option("--problems", serve.problems, "Problems file");
  serve_cmd->add_option("--models", serve.models, "Directory of .pgmd files");
  serve_cmd->add_option("--catalog", serve.catalog, "Feedback catalog (JSON)");
  serve_cmd->add_option("--log", serve.log, "Attempt log");
  serve_cmd->add_option("--webui", serve.webui, "Static files to serve at /");
  serve_cmd->add_option("--roster", serve.roster, "CSV student_id,group");
  serve_cmd->add_option("--provider", serve.provider, "Provider id");
  serve_cmd->add_option("--max-attempts", serve.max_attempts, "Per student and problem; 0 = unlimited");
  serve_cmd->add_option("--cache-dir", serve.cache_dir, "Cache directory");

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "Study statistics from an attempt log and survey");
  stats_cmd->add_option("--log", stats.log, "Attempt log");
  stats_cmd->add_option("--survey", stats.survey, "Survey CSV")->check(CLI::ExistingFile);
  stats_cmd->add_option("-o,--out", stats.out, "Output directory");
  stats_cmd->add_option("--min-chars", stats.min_chars, "Effort screening threshold");
  stats_cmd->add_flag("--paired", stats.paired, "Paired instead of Welch t-tests for survey items");
  stats_cmd->add_option("--negative", stats.negative, "Reverse-coded question ids")->delimiter(',');

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic labeled corpus");
  synth_cmd->add_option("--records", synth.records, "Number of proofs");
  synth_cmd->add_option("--problem", synth.problem, "Problem id");
  synth_cmd->add_option("--seed", synth.seed, "Seed");
  synth_cmd->add_option("--filler", synth.filler, "Filler words per proof");
  synth_cmd->add_option("--repeats", synth.repeats, "Marker repetitions per rubric point");
  synth_cmd->add_option("--provider", synth.provider, "Deterministic provider the markers are laid out for");
  synth_cmd->add_option("-o,--out", synth.out, "Output corpus (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    common.config =
        common.config_path.empty() ? default_config() : load_config(common.config_path);
    if (*ingest_cmd) return run_ingest(common, ingest);
    if (*embed_cmd) return run_embed(common, embed);
    if (*train_cmd) return run_train(common, train);
    if (*eval_cmd) return run_eval(common, eval);
    if (*sweep_cmd) return run_sweep(common, sweep);
    if (*grade_cmd) return run_grade(common, grade);
    if (*serve_cmd) return run_serve(common, serve);
    if (*stats_cmd) return run_stats(common, stats);
    if (*synth_cmd) return run_synth(common, synth);
  } catch (const Error& e) {
    fmt::print(stderr, "error [{}]: {}\n", to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    fmt::print(stderr, "error [internal]: {}\n", e.what());
    return 1;
  }
  return 1;
}
