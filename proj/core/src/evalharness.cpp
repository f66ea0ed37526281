#include "proofgrade/evalharness.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "proofgrade/embeddings.hpp"
#include "proofgrade/error.hpp"
#include "proofgrade/prng.hpp"

namespace proofgrade {
namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw Error(ErrorKind::Input, std::string(what) + ": length mismatch (" +
                                      std::to_string(a) + " vs " + std::to_string(b) + ")");
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ConfusionMatrix confusion(std::span<const std::uint8_t> predictions,
                          std::span<const std::uint8_t> truth) {
  require_same_length(predictions.size(), truth.size(), "confusion");
  if (predictions.empty()) throw Error(ErrorKind::Input, "confusion: no examples");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predictions[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) ++cm.tp;
    else if (p && !t) ++cm.fp;
    else if (!p && t) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorKind::Input, "accuracy of an empty confusion matrix");
  return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

double f1(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorKind::Input, "f1 of an empty confusion matrix");
  const std::size_t denom = 2 * cm.tp + cm.fp + cm.fn;
  if (denom == 0) return 1.0;
  return static_cast<double>(2 * cm.tp) / static_cast<double>(denom);
}

std::vector<double> total_scores(std::span<const RubricVector> rubrics) {
  std::vector<double> out;
  out.reserve(rubrics.size());
  for (const auto& r : rubrics)
    out.push_back(100.0 * static_cast<double>(r.passed()) / static_cast<double>(kRubricCount));
  return out;
}

double rmse(std::span<const double> x, std::span<const double> y) {
  require_same_length(x.size(), y.size(), "rmse");
  if (x.empty()) throw Error(ErrorKind::Input, "rmse: no values");
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(x.size()));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require_same_length(x.size(), y.size(), "pearson");
  if (x.size() < 2) throw Error(ErrorKind::Input, "pearson: need at least 2 values");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw Error(ErrorKind::Statistics, "pearson: zero variance input");
  return sxy / std::sqrt(sxx * syy);
}

MetricsReport evaluate_problem(const ProblemGrader& grader, const LabeledFeatures& test) {
  if (test.size() == 0) throw Error(ErrorKind::Input, "evaluate_problem: empty test split");
  if (test.x.dim() != grader.dim())
    throw Error(ErrorKind::Input, "evaluate_problem: feature dimension does not match grader");

  std::vector<RubricVector> predicted;
  predicted.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) predicted.push_back(grader.predict(test.x.row(i)));

  MetricsReport report;
  report.n_test = test.size();
  double acc_sum = 0.0;
  for (std::size_t r = 0; r < kRubricCount; ++r) {
    std::vector<std::uint8_t> p(test.size()), t(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      p[i] = predicted[i][r];
      t[i] = test.labels[i][r];
    }
    auto& m = report.per_rubric[r];
    m.confusion = confusion(p, t);
    m.accuracy = accuracy(m.confusion);
    m.f1 = f1(m.confusion);
    acc_sum += m.accuracy;
  }
  report.mean_accuracy = acc_sum / static_cast<double>(kRubricCount);

  const auto predicted_totals = total_scores(predicted);
  const auto true_totals = total_scores(test.labels);
  report.rmse_totals = rmse(predicted_totals, true_totals);
  try {
    report.pearson_totals = pearson(predicted_totals, true_totals);
  } catch (const Error&) {
    report.pearson_totals = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

MetricsReport evaluate_problem(const ProblemGrader& grader,
                               std::span<const ProofRecord> test_records,
                               Embedder& embedder) {
  if (grader.provider_id != embedder.provider().id())
    throw Error(ErrorKind::Conflict, "grader provider '" + grader.provider_id +
                                         "' differs from embedder provider '" +
                                         embedder.provider().id() + "'");
  return evaluate_problem(grader, embed_records(test_records, embedder));
}

std::vector<std::size_t> sweep_grid(std::size_t pool_size) {
  std::vector<std::size_t> grid;
  for (std::size_t s = 50; s <= 200 && s <= pool_size; s += 50) grid.push_back(s);
  for (std::size_t s = 300; s <= pool_size; s += 100) grid.push_back(s);
  return grid;
}

SweepResult size_sweep(const LabeledFeatures& features, const std::string& problem_id,
                       const std::string& provider_id, const TrainConfig& cfg,
                       double test_frac) {
  if (!(test_frac > 0.0 && test_frac < 1.0))
    throw Error(ErrorKind::Input, "size_sweep: test_frac must lie in (0, 1)");
  const std::size_t n = features.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  PortableRng rng(cfg.seed);
  shuffle(std::span<std::size_t>(order), rng);

  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_frac + 1e-9));
  if (n_test == 0) throw Error(ErrorKind::Input, "size_sweep: test set would be empty");
  const std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  const std::vector<std::size_t> pool_idx(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());

  const auto grid = sweep_grid(pool_idx.size());
  if (grid.empty())
    throw Error(ErrorKind::Input, "size_sweep: training pool of " + std::to_string(pool_idx.size()) +
                                      " rows is smaller than the smallest sweep size (50)");

  SweepResult result;
  const LabeledFeatures test = features.subset(test_idx);
  result.test_ids = test.ids;
  for (std::size_t i : pool_idx) result.pool_ids.push_back(features.ids[i]);

  for (std::size_t size : grid) {
    const std::span<const std::size_t> prefix(pool_idx.data(), size);
    const LabeledFeatures train = features.subset(prefix);
    const TrainedGrader trained = train_problem_grader(problem_id, provider_id, train, test, cfg);
    const MetricsReport report = evaluate_problem(trained.grader, test);
    SweepPoint point;
    point.train_size = size;
    point.mean_accuracy = report.mean_accuracy;
    for (std::size_t r = 0; r < kRubricCount; ++r) point.per_rubric[r] = report.per_rubric[r].accuracy;
    result.points.push_back(point);
  }
  return result;
}

SweepResult size_sweep(std::span<const ProofRecord> records, Embedder& embedder,
                       const TrainConfig& cfg, double test_frac) {
  if (records.empty()) throw Error(ErrorKind::Input, "size_sweep: no records");
  const std::string problem_id = records.front().problem_id;
  for (const auto& r : records)
    if (r.problem_id != problem_id)
      throw Error(ErrorKind::Input, "size_sweep: records span more than one problem");
  const LabeledFeatures features = embed_records(records, embedder);
  return size_sweep(features, problem_id, embedder.provider().id(), cfg, test_frac);
}

void write_metrics_csv(std::ostream& out, const std::string& problem_id,
                       const MetricsReport& report, bool header) {
  if (header) out << "problem,rubric,accuracy,f1,tp,fp,tn,fn\n";
  for (std::size_t r = 0; r < kRubricCount; ++r) {
    const auto& m = report.per_rubric[r];
    fmt::print(out, "{},{},{},{},{},{},{},{}\n", problem_id, rubric_label(r), m.accuracy, m.f1,
               m.confusion.tp, m.confusion.fp, m.confusion.tn, m.confusion.fn);
  }
}

void write_sweep_csv(std::ostream& out, const std::string& problem_id,
                     const std::string& provider_id, const SweepResult& sweep, bool header) {
  if (header) out << "problem,provider,train_size,mean_accuracy\n";
  for (const auto& p : sweep.points)
    fmt::print(out, "{},{},{},{}\n", problem_id, provider_id, p.train_size, p.mean_accuracy);
}

void print_metrics_table(std::ostream& out, const std::string& problem_id,
                         const MetricsReport& report) {
  fmt::print(out, "problem {}  (n_test = {})\n", problem_id, report.n_test);
  fmt::print(out, "{:<7}{:>10}{:>8}{:>6}{:>6}{:>6}{:>6}\n", "rubric", "accuracy", "F1", "TP",
             "FP", "TN", "FN");
  for (std::size_t r = 0; r < kRubricCount; ++r) {
    const auto& m = report.per_rubric[r];
    fmt::print(out, "{:<7}{:>10.3f}{:>8.3f}{:>6}{:>6}{:>6}{:>6}\n", rubric_label(r), m.accuracy,
               m.f1, m.confusion.tp, m.confusion.fp, m.confusion.tn, m.confusion.fn);
  }
  fmt::print(out, "mean accuracy {:.1f}%   RMSE {:.2f}   Pearson r {:.2f}\n",
             100.0 * report.mean_accuracy, report.rmse_totals, report.pearson_totals);
}

}  // namespace proofgrade
