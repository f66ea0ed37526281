#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "proofgrade/corpus.hpp"
#include "proofgrade/grader.hpp"

namespace proofgrade {

class Embedder;

/// Positive class is 1 ("correct").
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const std::uint8_t> predictions,
                          std::span<const std::uint8_t> truth);

/// (tp + tn) / n.
double accuracy(const ConfusionMatrix& cm);

/// 2tp / (2tp + fp + fn); defined as 1 when there are no positives in
/// either predictions or truth.
double f1(const ConfusionMatrix& cm);

/// 100 * (bits set) / 7 for each vector.
std::vector<double> total_scores(std::span<const RubricVector> rubrics);

double rmse(std::span<const double> x, std::span<const double> y);

/// Pearson correlation; throws Error(Statistics) if either input has zero
/// variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct RubricMetrics {
  double accuracy = 0.0;
  double f1 = 0.0;
  ConfusionMatrix confusion;
};

struct MetricsReport {
  std::array<RubricMetrics, kRubricCount> per_rubric;
  double mean_accuracy = 0.0;
  double rmse_totals = 0.0;
  /// NaN when either total-score vector is constant.
  double pearson_totals = 0.0;
  std::size_t n_test = 0;
};

MetricsReport evaluate_problem(const ProblemGrader& grader, const LabeledFeatures& test);

/// Embeds `test_records` with `embedder` and evaluates.
MetricsReport evaluate_problem(const ProblemGrader& grader,
                               std::span<const ProofRecord> test_records,
                               Embedder& embedder);

/// 50, 100, 150, 200, then steps of 100, keeping sizes <= pool_size.
std::vector<std::size_t> sweep_grid(std::size_t pool_size);

struct SweepPoint {
  std::size_t train_size = 0;
  double mean_accuracy = 0.0;
  std::array<double, kRubricCount> per_rubric{};
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<std::string> test_ids;
  /// Shuffled training pool; point k trains on its first train_size ids.
  std::vector<std::string> pool_ids;
};

/// Training-size sweep over the records of one problem. A fixed test set of
/// floor(n * test_frac) records is drawn with PortableRng(cfg.seed); the
/// remaining pool is trained in nested prefixes. Epochs are selected on the
/// fixed test set.
SweepResult size_sweep(std::span<const ProofRecord> records, Embedder& embedder,
                       const TrainConfig& cfg, double test_frac = 0.30);

/// Same as above on precomputed features (rows aligned with `records`).
SweepResult size_sweep(const LabeledFeatures& features, const std::string& problem_id,
                       const std::string& provider_id, const TrainConfig& cfg,
                       double test_frac = 0.30);

/// problem,rubric,accuracy,f1,tp,fp,tn,fn
void write_metrics_csv(std::ostream& out, const std::string& problem_id,
                       const MetricsReport& report, bool header = true);

/// problem,provider,train_size,mean_accuracy
void write_sweep_csv(std::ostream& out, const std::string& problem_id,
                     const std::string& provider_id, const SweepResult& sweep,
                     bool header = true);

/// Human-readable summary table.
void print_metrics_table(std::ostream& out, const std::string& problem_id,
                         const MetricsReport& report);

}  // namespace proofgrade
