#include "commands.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <signal.h>

#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "manifest.hpp"
#include "proofgrade/digest.hpp"
#include "proofgrade/embeddings.hpp"
#include "proofgrade/error.hpp"
#include "proofgrade/evalharness.hpp"
#include "proofgrade/feedback.hpp"
#include "proofgrade/grader.hpp"
#include "proofgrade/grading_service.hpp"
#include "proofgrade/http_server.hpp"
#include "proofgrade/prng.hpp"
#include "proofgrade/studystats.hpp"
#include "proofgrade/synthetic.hpp"

namespace proofgrade::cli {
namespace {

using nlohmann::ordered_json;

fs::path pick(const fs::path& flag, const fs::path& configured, const char* what) {
  if (!flag.empty()) return flag;
  if (!configured.empty()) return configured;
  throw Error(ErrorKind::Input, fmt::format("no {} given (flag or [paths] entry)", what));
}

std::string pick_provider(const std::string& flag, const Common& c) {
  if (!flag.empty()) return flag;
  if (!c.config.server.provider.empty()) return c.config.server.provider;
  return "test";
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::ofstream open_out(const fs::path& p) {
  ensure_parent(p);
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::Config, "cannot write " + p.string());
  return out;
}

TrainConfig training_config(const Common& c, std::optional<std::uint64_t> seed,
                            const std::vector<int>& epochs, const std::string& selection,
                            std::optional<unsigned> threads) {
  TrainConfig cfg = c.config.training;
  if (seed) cfg.seed = *seed;
  if (!epochs.empty()) cfg.epochs_grid = epochs;
  if (selection == "test") {
    cfg.selection_split = SelectionSplit::Test;
  } else if (selection == "validation") {
    cfg.selection_split = SelectionSplit::Validation;
  } else if (!selection.empty()) {
    throw Error(ErrorKind::Input, "--selection must be validation or test");
  }
  if (threads) cfg.threads = *threads;
  cfg.validate();
  return cfg;
}

struct CachedEmbedder {
  std::shared_ptr<Embedder> embedder;
  fs::path cache_file;

  void save() const {
    if (cache_file.empty()) return;
    ensure_parent(cache_file);
    embedder->cache().export_to(cache_file);
  }
};

CachedEmbedder make_embedder(const Common& c, const std::string& provider_id,
                             const fs::path& cache_dir_flag) {
  CachedEmbedder ce;
  ce.embedder = std::make_shared<Embedder>(Embedder::from_config(c.config.provider(provider_id)));
  const fs::path dir = cache_dir_flag.empty() ? c.config.paths.cache_dir : cache_dir_flag;
  if (!dir.empty()) {
    ce.cache_file = dir / (provider_id + ".pgec");
    if (fs::exists(ce.cache_file)) ce.embedder->cache().import_from(ce.cache_file);
  }
  return ce;
}

std::vector<ProofRecord> problem_records(const fs::path& corpus, const std::string& problem) {
  auto records = filter_problem(filter_nonempty(load_corpus(corpus)), problem);
  if (records.empty())
    throw Error(ErrorKind::Input,
                fmt::format("corpus {} has no non-empty proofs for problem {}", corpus.string(),
                            problem));
  return records;
}

// Split file: {"seed", "fractions", "problems": {id: {"train", "test", "validation"}}}
void write_split_file(const fs::path& path, std::uint64_t seed, const SplitFractions& f,
                      const std::map<std::string, DatasetSplit>& splits) {
  ordered_json j;
  j["seed"] = seed;
  j["fractions"] = {{"train", f.train}, {"test", f.test}, {"validation", f.validation}};
  ordered_json problems = ordered_json::object();
  for (const auto& [id, s] : splits)
    problems[id] = {{"train", s.train_ids}, {"test", s.test_ids}, {"validation", s.validation_ids}};
  j["problems"] = problems;
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

DatasetSplit read_split_file(const fs::path& path, const std::string& problem) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::NotFound, "split file not found: " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
    DatasetSplit s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.fractions.train = j.at("fractions").at("train").get<double>();
    s.fractions.test = j.at("fractions").at("test").get<double>();
    s.fractions.validation = j.at("fractions").at("validation").get<double>();
    const auto& p = j.at("problems");
    if (!p.contains(problem))
      throw Error(ErrorKind::Input,
                  fmt::format("split file {} has no entry for {}", path.string(), problem));
    s.train_ids = p.at(problem).at("train").get<std::vector<std::string>>();
    s.test_ids = p.at(problem).at("test").get<std::vector<std::string>>();
    s.validation_ids = p.at(problem).at("validation").get<std::vector<std::string>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, "malformed split file " + path.string() + ": " + e.what());
  }
}

std::string read_text(const fs::path& path) {
  if (path == "-") {
    std::stringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::NotFound, "file not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string rubric_line(const RubricVector& r) {
  std::string s;
  for (std::size_t i = 0; i < kRubricCount; ++i)
    s += fmt::format("{}{}={}", i ? "  " : "", rubric_label(i), static_cast<int>(r[i]));
  return s;
}

}  // namespace

int run_ingest(const Common& c, const IngestArgs& a) {
  const fs::path corpus = pick(a.corpus, c.config.paths.corpus, "corpus");
  const fs::path out = a.out;
  RunManifest m("ingest", c.argv);
  m.set_config(describe_config(c.config));
  const std::uint64_t seed = a.seed.value_or(c.config.training.seed);
  m.set_seed(seed);
  m.add_input(corpus);

  const auto all = load_corpus(corpus);
  const auto kept = filter_nonempty(all);
  std::map<std::string, std::size_t> per_problem;
  for (const auto& r : kept) ++per_problem[r.problem_id];
  if (!a.problems.empty()) {
    m.add_input(a.problems);
    std::set<std::string> known;
    for (const auto& p : load_problems(a.problems)) known.insert(p.problem_id);
    for (const auto& [id, n] : per_problem)
      if (!known.count(id))
        throw Error(ErrorKind::Input, fmt::format("corpus problem {} is not in {}", id,
                                                  a.problems.string()));
  }
  fmt::print("{} records, {} non-empty\n", all.size(), kept.size());
  for (const auto& [id, n] : per_problem) fmt::print("  {}: {}\n", id, n);

  if (!out.empty()) {
    auto os = open_out(out);
    write_corpus(os, kept);
    os.close();
    m.add_output(out);
  }
  if (!a.split_out.empty()) {
    std::map<std::string, DatasetSplit> splits;
    for (const auto& [id, n] : per_problem) {
      const auto recs = filter_problem(kept, id);
      splits[id] = split_dataset(recs, seed, c.config.fractions);
      fmt::print("  {} split: train {} / test {} / validation {}\n", id,
                 splits[id].train_ids.size(), splits[id].test_ids.size(),
                 splits[id].validation_ids.size());
    }
    write_split_file(a.split_out, seed, c.config.fractions, splits);
    m.add_output(a.split_out);
  }
  m.write(c.manifest);
  return 0;
}

int run_embed(const Common& c, const EmbedArgs& a) {
  const std::string provider = pick_provider(a.provider, c);
  RunManifest m("embed", c.argv);
  m.set_config(describe_config(c.config));
  auto ce = make_embedder(c, provider, a.cache_dir);
  if (!a.import_path.empty()) {
    m.add_input(a.import_path);
    const auto n = ce.embedder->cache().import_from(a.import_path);
    fmt::print("imported {} cache entries from {}\n", n, a.import_path.string());
  }
  if (!a.corpus.empty() || !c.config.paths.corpus.empty()) {
    const fs::path corpus = pick(a.corpus, c.config.paths.corpus, "corpus");
    m.add_input(corpus);
    const auto records = filter_nonempty(load_corpus(corpus));
    std::vector<std::string> texts;
    texts.reserve(records.size());
    for (const auto& r : records) texts.push_back(r.body_markdown);
    m.start("embed");
    const std::size_t before = ce.embedder->provider().calls();
    const BatchResult res = ce.embedder->embed_batch(texts);
    m.stop("embed");
    ce.save();
    fmt::print("{} texts, {} embedded, {} failed, {} provider calls, cache size {}\n",
               texts.size(), res.succeeded, res.errors.size(),
               ce.embedder->provider().calls() - before, ce.embedder->cache().size());
    for (const auto& e : res.errors)
      fmt::print(std::cerr, "  {}: {}\n", records[e.index].proof_id, e.message);
    if (!res.ok())
      throw ProviderError(fmt::format("{} of {} texts could not be embedded", res.errors.size(),
                                      texts.size()));
  } else {
    ce.save();
  }
  if (!ce.cache_file.empty()) m.add_output(ce.cache_file);
  if (!a.export_path.empty()) {
    ensure_parent(a.export_path);
    const auto n = ce.embedder->cache().export_to(a.export_path);
    fmt::print("exported {} cache entries to {}\n", n, a.export_path.string());
    m.add_output(a.export_path);
  }
  m.write(c.manifest);
  return 0;
}

int run_train(const Common& c, const TrainArgs& a) {
  const fs::path corpus = pick(a.corpus, c.config.paths.corpus, "corpus");
  const std::string provider = pick_provider(a.provider, c);
  const TrainConfig cfg = training_config(c, a.seed, a.epochs, a.selection, a.threads);
  fs::path out = a.out;
  if (out.empty()) out = pick({}, c.config.paths.models, "--out or [paths] models") / (a.problem + ".pgmd");

  RunManifest m("train", c.argv);
  m.set_config(describe_config(c.config));
  m.set_seed(cfg.seed);
  m.add_input(corpus);
  const auto records = problem_records(corpus, a.problem);
  DatasetSplit split;
  if (!a.split.empty()) {
    m.add_input(a.split);
    split = read_split_file(a.split, a.problem);
  } else {
    split = split_dataset(records, cfg.seed, c.config.fractions);
  }
  auto ce = make_embedder(c, provider, a.cache_dir);
  m.start("train");
  const TrainedGrader trained = train_problem_grader(records, split, a.problem, *ce.embedder, cfg);
  m.stop("train");
  ce.save();

  ensure_parent(out);
  save_model(out, trained.grader);
  m.add_output(out);
  fmt::print("trained {} on {} records ({} selection)\n", a.problem, split.train_ids.size(),
             cfg.selection_split == SelectionSplit::Test ? "test" : "validation");
  for (const auto& r : trained.report.rubrics)
    fmt::print("  {}: {} epochs, selection accuracy {:.4f}\n", rubric_label(r.rubric),
               r.selected_epochs, r.selected_accuracy);

  if (!a.report.empty()) {
    ordered_json j;
    j["problem_id"] = a.problem;
    j["provider_id"] = provider;
    j["selection_split"] = cfg.selection_split == SelectionSplit::Test ? "test" : "validation";
    ordered_json rubrics = ordered_json::array();
    for (const auto& r : trained.report.rubrics)
      rubrics.push_back({{"rubric", rubric_label(r.rubric)},
                         {"epochs", r.epochs},
                         {"accuracies", r.accuracies},
                         {"selected_epochs", r.selected_epochs},
                         {"selected_accuracy", r.selected_accuracy}});
    j["rubrics"] = rubrics;
    auto os = open_out(a.report);
    os << j.dump(2) << '\n';
    m.add_output(a.report);
  }
  m.write(c.manifest);
  return 0;
}

int run_eval(const Common& c, const EvalArgs& a) {
  const fs::path corpus = pick(a.corpus, c.config.paths.corpus, "corpus");
  RunManifest m("eval", c.argv);
  m.set_config(describe_config(c.config));
  m.add_input(a.model);
  m.add_input(corpus);
  const ProblemGrader grader = load_model(a.model);
  const auto records = problem_records(corpus, grader.problem_id);

  std::vector<ProofRecord> chosen;
  if (a.set == "all") {
    chosen = records;
  } else {
    DatasetSplit split;
    if (!a.split.empty()) {
      m.add_input(a.split);
      split = read_split_file(a.split, grader.problem_id);
    } else {
      const std::uint64_t seed = a.seed.value_or(c.config.training.seed);
      m.set_seed(seed);
      split = split_dataset(records, seed, c.config.fractions);
    }
    if (a.set == "test") {
      chosen = select_records(records, split.test_ids);
    } else if (a.set == "validation") {
      chosen = select_records(records, split.validation_ids);
    } else {
      throw Error(ErrorKind::Input, "--set must be test, validation or all");
    }
  }
  auto ce = make_embedder(c, grader.provider_id, a.cache_dir);
  const MetricsReport report = evaluate_problem(grader, chosen, *ce.embedder);
  ce.save();
  print_metrics_table(std::cout, grader.problem_id, report);
  if (!a.out.empty()) {
    auto os = open_out(a.out);
    write_metrics_csv(os, grader.problem_id, report);
    os.close();
    m.add_output(a.out);
  }
  m.note("mean_accuracy", fmt::format("{}", report.mean_accuracy));
  m.write(c.manifest);
  return 0;
}

int run_sweep(const Common& c, const SweepArgs& a) {
  const fs::path corpus = pick(a.corpus, c.config.paths.corpus, "corpus");
  const std::string provider = pick_provider(a.provider, c);
  const TrainConfig cfg = training_config(c, a.seed, {}, "", a.threads);
  RunManifest m("sweep", c.argv);
  m.set_config(describe_config(c.config));
  m.set_seed(cfg.seed);
  m.add_input(corpus);
  const auto records = problem_records(corpus, a.problem);
  auto ce = make_embedder(c, provider, a.cache_dir);
  m.start("sweep");
  const SweepResult sweep = size_sweep(records, *ce.embedder, cfg, a.test_frac);
  m.stop("sweep");
  ce.save();
  fmt::print("{} {}: test set {}, pool {}\n", a.problem, provider, sweep.test_ids.size(),
             sweep.pool_ids.size());
  for (const auto& p : sweep.points)
    fmt::print("  n={:>5}  mean accuracy {:.4f}\n", p.train_size, p.mean_accuracy);
  if (!a.out.empty()) {
    auto os = open_out(a.out);
    write_sweep_csv(os, a.problem, provider, sweep);
    os.close();
    m.add_output(a.out);
  }
  m.write(c.manifest);
  return 0;
}

int run_grade(const Common& c, const GradeArgs& a) {
  const ProblemGrader grader = load_model(a.model);
  const std::string body = read_text(a.in);
  const Strategy strategy = parse_strategy(a.strategy);
  FeedbackCatalog catalog;
  if (!a.catalog.empty()) {
    catalog = FeedbackCatalog::load(a.catalog);
  } else if (!c.config.paths.catalog.empty()) {
    catalog = FeedbackCatalog::load(c.config.paths.catalog);
  }
  auto ce = make_embedder(c, grader.provider_id, a.cache_dir);
  const GradeResult graded = grade_proof(grader, body, *ce.embedder);
  ce.save();
  const std::string hash = to_hex(sha256(body));
  PortableRng rng(random_feedback_seed(a.student, grader.problem_id, hash));
  const FeedbackBundle fb =
      select_feedback(graded.rubric, strategy, catalog.for_problem(grader.problem_id), &rng);
  const double score = score_percent(graded.rubric);

  if (a.json) {
    ordered_json j;
    j["problem_id"] = grader.problem_id;
    std::vector<int> bits(graded.rubric.bits.begin(), graded.rubric.bits.end());
    j["rubric"] = bits;
    j["score_percent"] = score;
    j["empty_submission"] = graded.empty_submission;
    j["strategy"] = std::string(to_string(strategy));
    j["general_message"] = fb.general_message;
    ordered_json revealed = ordered_json::array();
    for (const auto& r : fb.revealed)
      revealed.push_back({{"rubric", rubric_label(r.rubric)}, {"message", r.message}});
    j["revealed"] = revealed;
    if (strategy == Strategy::SelfEval) j["rubric_checklist"] = fb.rubric_checklist;
    fmt::print("{}\n", j.dump(2));
    return 0;
  }
  fmt::print("problem  {}\n", grader.problem_id);
  fmt::print("rubric   {}\n", rubric_line(graded.rubric));
  fmt::print("score    {:.1f}\n", score);
  fmt::print("message  {}\n", fb.general_message);
  for (const auto& r : fb.revealed) fmt::print("feedback {}: {}\n", rubric_label(r.rubric), r.message);
  for (const auto& item : fb.rubric_checklist) fmt::print("  [ ] {}\n", item);
  if (graded.empty_submission) fmt::print("note     empty submission, graded as all zeros\n");
  return 0;
}

int run_serve(const Common& c, const ServeArgs& a) {
  const fs::path problems_path = pick(a.problems, c.config.paths.problems, "problems file");
  auto problems = load_problems(problems_path);

  std::map<std::string, ProblemGrader, std::less<>> graders;
  const fs::path models = a.models.empty() ? c.config.paths.models : a.models;
  if (!models.empty()) {
    if (!fs::is_directory(models))
      throw Error(ErrorKind::NotFound, "model directory not found: " + models.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(models))
      if (e.is_regular_file() && e.path().extension() == ".pgmd") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      ProblemGrader g = load_model(f);
      const std::string id = g.problem_id;
      if (!graders.emplace(id, std::move(g)).second)
        throw Error(ErrorKind::Conflict, "two model files for problem " + id);
      fmt::print("loaded model for {} from {}\n", id, f.string());
    }
  }

  std::string provider = a.provider.empty() ? c.config.server.provider : a.provider;
  if (provider.empty() && !graders.empty()) provider = graders.begin()->second.provider_id;
  CachedEmbedder ce;
  if (!provider.empty()) ce = make_embedder(c, provider, a.cache_dir);

  FeedbackCatalog catalog = FeedbackCatalog::from_problems(problems);
  const fs::path catalog_path = a.catalog.empty() ? c.config.paths.catalog : a.catalog;
  if (!catalog_path.empty()) catalog = FeedbackCatalog::load(catalog_path);

  ServiceOptions opts;
  opts.max_attempts = a.max_attempts.value_or(c.config.server.max_attempts);
  opts.max_body_bytes = c.config.server.max_body_bytes;
  const fs::path roster = a.roster.empty() ? c.config.server.roster : a.roster;
  if (!roster.empty()) opts.roster = load_roster(roster);

  fs::path log_path = a.log.empty() ? c.config.paths.attempt_log : a.log;
  if (log_path.empty()) log_path = "attempts.jsonl";
  AttemptLog log(log_path);
  GradingService service(std::move(problems), std::move(graders), ce.embedder, std::move(catalog),
                         log, std::move(opts));

  HttpOptions http;
  http.host = a.host.value_or(c.config.server.host);
  http.port = a.port.value_or(c.config.server.port);
  http.static_dir = a.webui.empty() ? c.config.paths.webui : a.webui;
  http.max_body_bytes = c.config.server.max_body_bytes;

  // Block termination signals here and wait for them on a helper thread so
  // the server is stopped outside of signal context.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  HttpServer server(service, http);
  const int port = server.bind();
  fmt::print("listening on http://{}:{} (attempt log {})\n", http.host, port, log_path.string());
  std::fflush(stdout);
  std::jthread waiter([&server, signals]() {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  // Wake the waiter if listen() returned for another reason.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  ce.save();
  return 0;
}

int run_stats(const Common& c, const StatsArgs& a) {
  const fs::path log_path = pick(a.log, c.config.paths.attempt_log, "attempt log");
  const fs::path out = pick(a.out, c.config.paths.output, "--out directory");
  RunManifest m("stats", c.argv);
  m.add_input(log_path);
  const auto attempts = load_attempt_log(log_path);
  std::vector<LikertResponse> survey;
  if (!a.survey.empty()) {
    m.add_input(a.survey);
    survey = load_survey_csv(a.survey);
  }
  StudyTablesConfig cfg;
  cfg.min_chars = a.min_chars;
  cfg.paired_survey_tests = a.paired;
  if (!a.negative.empty()) cfg.negatively_worded = {a.negative.begin(), a.negative.end()};
  const StudyTables t = build_study_tables(attempts, survey, cfg);

  fs::create_directories(out);
  const std::pair<const char*, const std::string*> files[] = {
      {"scores.csv", &t.scores_csv},
      {"posthoc.csv", &t.posthoc_csv},
      {"regression.csv", &t.regression_csv},
      {"survey_pairs.csv", &t.survey_pairs_csv},
      {"survey_anova.csv", &t.survey_anova_csv},
      {"reliability.csv", &t.reliability_csv},
      {"exclusions.csv", &t.exclusions_csv}};
  for (const auto& [name, text] : files) {
    auto os = open_out(out / name);
    os << *text;
    os.close();
    m.add_output(out / name);
  }
  fmt::print("{} attempts read; tables written to {}\n", attempts.size(), out.string());
  for (const auto& n : t.notes) fmt::print(std::cerr, "note: {}\n", n);
  m.write(c.manifest.empty() ? out / "manifest.json" : c.manifest);
  return 0;
}

int run_synth(const Common& c, const SynthArgs& a) {
  SyntheticCorpusSpec spec;
  spec.records = a.records;
  spec.problem_id = a.problem;
  spec.seed = a.seed;
  spec.filler_words = a.filler;
  spec.marker_repeats = a.repeats;
  const ProviderConfig& pc = c.config.provider(a.provider);
  if (pc.kind == ProviderKind::DeterministicTest) {
    spec.hash_dim = pc.dim;
    spec.hash_seed = pc.seed;
  } else {
    spec.hash_dim = 0;
  }
  const auto records = synthetic_corpus(spec);
  RunManifest m("synth", c.argv);
  m.set_seed(a.seed);
  if (a.out.empty() || a.out == "-") {
    write_corpus(std::cout, records);
    return 0;
  }
  auto os = open_out(a.out);
  write_corpus(os, records);
  os.close();
  m.add_output(a.out);
  m.write(c.manifest);
  fmt::print(std::cerr, "wrote {} synthetic records to {}\n", records.size(), a.out.string());
  return 0;
}

}  // namespace proofgrade::cli
