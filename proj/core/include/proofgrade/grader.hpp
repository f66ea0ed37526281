#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "proofgrade/corpus.hpp"

namespace proofgrade {

class Embedder;

enum class SelectionSplit { Validation, Test };

struct TrainConfig {
  std::size_t batch_size = 128;
  std::vector<int> epochs_grid = {100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
  double peak_lr = 0.001;
  double warmup_frac = 0.6;
  double decay_floor_frac = 0.1;
  std::uint64_t seed = 0;
  SelectionSplit selection_split = SelectionSplit::Validation;
  /// Rubric models trained concurrently. Results do not depend on it.
  unsigned threads = 1;

  void validate() const;
};

/// Per-epoch learning rate. With w = floor(warmup_frac * total):
///   epoch <  w : peak * (epoch + 1) / w
///   epoch >= w : peak * floor_frac ^ ((epoch - w + 1) / (total - w))
double lr_at(int epoch, int total_epochs, const TrainConfig& cfg);

/// Dense row-major design matrix.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t dim)
      : rows_(rows), dim_(dim), values_(rows * dim, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::span<double> row(std::size_t i) { return {values_.data() + i * dim_, dim_}; }

  void append_row(std::span<const double> values);

  /// Rows `indices` (in that order) as a new matrix.
  FeatureMatrix subset(std::span<const std::size_t> indices) const;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

/// 2-class linear head: logits = W x + b with W stored row-major (2 x dim).
struct SoftmaxParams {
  std::size_t dim = 0;
  std::vector<double> weights;
  std::array<double, 2> bias{0.0, 0.0};

  static SoftmaxParams zeros(std::size_t dim) {
    return SoftmaxParams{dim, std::vector<double>(2 * dim, 0.0), {0.0, 0.0}};
  }
};

/// Mean softmax cross-entropy over `rows` of x. When `grad` is non-null it
/// receives the gradient with respect to every parameter.
double softmax_cross_entropy(const SoftmaxParams& params, const FeatureMatrix& x,
                             std::span<const std::uint8_t> labels,
                             std::span<const std::size_t> rows,
                             SoftmaxParams* grad);

struct LinearRubricModel {
  std::size_t rubric = 0;  // 0..6 for R1..R7
  std::string problem_id;
  std::string provider_id;
  SoftmaxParams params;
  int trained_epochs = 0;
  std::uint64_t seed = 0;
  double train_loss_final = 0.0;

  std::size_t dim() const noexcept { return params.dim; }
};

/// softmax(W x + b) as (p_incorrect, p_correct).
std::array<double, 2> predict_proba(const LinearRubricModel& model,
                                    std::span<const double> embedding);

/// 1 iff p_correct > 0.5; an exact tie predicts 0.
int predict(const LinearRubricModel& model, std::span<const double> embedding);

struct EpochStats {
  int epoch = 0;
  double learning_rate = 0.0;
  double mean_loss = 0.0;
};

/// Test and diagnostics hooks. `schedule` replaces lr_at when set.
struct TrainHooks {
  std::function<double(int epoch, int total_epochs)> schedule;
  std::function<void(const EpochStats&)> on_epoch;
};

/// Mini-batch gradient descent from zero parameters. Every epoch the row
/// order is reset to 0..n-1 and shuffled with PortableRng(cfg.seed) (one
/// generator for the whole run); batches are consecutive runs of
/// batch_size rows, the last possibly short.
LinearRubricModel train_rubric_model(const FeatureMatrix& x,
                                     std::span<const std::uint8_t> labels,
                                     const TrainConfig& cfg, int total_epochs,
                                     const TrainHooks& hooks = {});

struct ProblemGrader {
  std::string problem_id;
  std::string provider_id;
  std::array<LinearRubricModel, kRubricCount> models;

  std::size_t dim() const noexcept { return models[0].dim(); }

  /// All seven models present, consistent ids and dimensions, finite
  /// parameters.
  void validate() const;

  RubricVector predict(std::span<const double> embedding) const;
};

/// Embeddings plus collapsed labels for a list of records.
struct LabeledFeatures {
  FeatureMatrix x;
  std::vector<RubricVector> labels;
  std::vector<std::string> ids;

  std::size_t size() const noexcept { return labels.size(); }
  std::vector<std::uint8_t> rubric_labels(std::size_t rubric) const;
  LabeledFeatures subset(std::span<const std::size_t> indices) const;
};

LabeledFeatures embed_records(std::span<const ProofRecord> records,
                              Embedder& embedder);

struct RubricSelection {
  std::size_t rubric = 0;
  std::vector<int> epochs;
  std::vector<double> accuracies;
  int selected_epochs = 0;
  double selected_accuracy = 0.0;
};

struct SelectionReport {
  std::array<RubricSelection, kRubricCount> rubrics;
};

struct TrainedGrader {
  ProblemGrader grader;
  SelectionReport report;
};

/// Epoch-grid selection on precomputed features. Rubric i trains with seed
/// cfg.seed + i; the grid value with the highest selection accuracy wins,
/// ties going to the fewest epochs.
TrainedGrader train_problem_grader(const std::string& problem_id,
                                   const std::string& provider_id,
                                   const LabeledFeatures& train,
                                   const LabeledFeatures& selection,
                                   const TrainConfig& cfg);

/// Embeds the split's records of `problem_id` and trains on them, selecting
/// on the split named by cfg.selection_split.
TrainedGrader train_problem_grader(std::span<const ProofRecord> records,
                                   const DatasetSplit& split,
                                   const std::string& problem_id,
                                   Embedder& embedder, const TrainConfig& cfg);

struct GradeResult {
  RubricVector rubric;
  bool empty_submission = false;
};

/// normalise -> (merge) -> embed -> seven predictions. A blank body grades
/// as all zeros with `empty_submission` set instead of failing.
GradeResult grade_proof(const ProblemGrader& grader, std::string_view body_markdown,
                        Embedder& embedder);

/// Binary model file (little-endian):
///   "PGMD" | u16 version | str problem_id | str provider_id | u32 dim |
///   u64 seed | u8 model_count (= 7) |
///   model_count x (u32 trained_epochs | f64 train_loss_final) |
///   model_count x (2*dim f64 weights row-major | 2 f64 bias)
/// where str is a u32 byte length followed by UTF-8 bytes.
inline constexpr std::uint16_t kModelFormatVersion = 1;

void write_model(std::ostream& out, const ProblemGrader& grader);
ProblemGrader read_model(std::istream& in);
void save_model(const std::filesystem::path& path, const ProblemGrader& grader);
ProblemGrader load_model(const std::filesystem::path& path);

}  // namespace proofgrade
