#include "proofgrade/grader.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>
#include <unordered_set>

#include "proofgrade/embeddings.hpp"
#include "proofgrade/error.hpp"
#include "proofgrade/mathtext.hpp"
#include "proofgrade/prng.hpp"

namespace proofgrade {
namespace {

struct Logits {
  double z0;
  double z1;
};

Logits logits(const SoftmaxParams& p, std::span<const double> x) {
  const double* w0 = p.weights.data();
  const double* w1 = w0 + p.dim;
  double z0 = p.bias[0];
  double z1 = p.bias[1];
  for (std::size_t j = 0; j < p.dim; ++j) {
    z0 += w0[j] * x[j];
    z1 += w1[j] * x[j];
  }
  return {z0, z1};
}

void check_dim(const LinearRubricModel& model, std::span<const double> x) {
  if (x.size() != model.dim())
    throw Error(ErrorKind::Input, "embedding dimension " + std::to_string(x.size()) +
                                      " does not match model dimension " +
                                      std::to_string(model.dim()));
}

bool all_finite(const SoftmaxParams& p) {
  return std::all_of(p.weights.begin(), p.weights.end(),
                     [](double v) { return std::isfinite(v); }) &&
         std::isfinite(p.bias[0]) && std::isfinite(p.bias[1]);
}

double selection_accuracy(const LinearRubricModel& model, const FeatureMatrix& x,
                          std::span<const std::uint8_t> labels) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    if (predict(model, x.row(i)) == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(x.rows());
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error(ErrorKind::Config, "batch_size must be at least 1");
  if (!(warmup_frac > 0.0 && warmup_frac < 1.0))
    throw Error(ErrorKind::Config, "warmup_frac must lie in (0, 1)");
  if (!(decay_floor_frac > 0.0 && decay_floor_frac <= 1.0))
    throw Error(ErrorKind::Config, "decay_floor_frac must lie in (0, 1]");
  if (!(peak_lr > 0.0) || !std::isfinite(peak_lr))
    throw Error(ErrorKind::Config, "peak_lr must be positive");
  if (epochs_grid.empty()) throw Error(ErrorKind::Config, "epochs_grid is empty");
  for (std::size_t i = 0; i < epochs_grid.size(); ++i) {
    if (epochs_grid[i] <= 0)
      throw Error(ErrorKind::Config, "epochs_grid entries must be positive");
    if (i > 0 && epochs_grid[i] <= epochs_grid[i - 1])
      throw Error(ErrorKind::Config, "epochs_grid must be strictly ascending");
  }
  if (threads < 1) throw Error(ErrorKind::Config, "threads must be at least 1");
}

double lr_at(int epoch, int total_epochs, const TrainConfig& cfg) {
  if (total_epochs < 2)
    throw Error(ErrorKind::Input, "lr_at: total_epochs must be at least 2");
  if (epoch < 0 || epoch >= total_epochs)
    throw Error(ErrorKind::Input, "lr_at: epoch out of range");
  const int warmup =
      static_cast<int>(std::floor(cfg.warmup_frac * total_epochs + 1e-9));
  if (epoch < warmup)
    return cfg.peak_lr * static_cast<double>(epoch + 1) / static_cast<double>(warmup);
  const double progress = static_cast<double>(epoch - warmup + 1) /
                          static_cast<double>(total_epochs - warmup);
  return cfg.peak_lr * std::pow(cfg.decay_floor_frac, progress);
}

void FeatureMatrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && dim_ == 0) dim_ = values.size();
  if (values.size() != dim_)
    throw Error(ErrorKind::Input, "feature row has dimension " +
                                      std::to_string(values.size()) + ", expected " +
                                      std::to_string(dim_));
  values_.insert(values_.end(), values.begin(), values.end());
  ++rows_;
}

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> indices) const {
  FeatureMatrix out(0, dim_);
  for (std::size_t i : indices) out.append_row(row(i));
  return out;
}

double softmax_cross_entropy(const SoftmaxParams& params, const FeatureMatrix& x,
                             std::span<const std::uint8_t> labels,
                             std::span<const std::size_t> rows,
                             SoftmaxParams* grad) {
  const std::size_t d = params.dim;
  if (grad) {
    grad->dim = d;
    grad->weights.assign(2 * d, 0.0);
    grad->bias = {0.0, 0.0};
  }
  if (rows.empty()) return 0.0;

  double loss = 0.0;
  for (std::size_t r : rows) {
    const auto xr = x.row(r);
    const auto [z0, z1] = logits(params, xr);
    const double m = std::max(z0, z1);
    const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
    const int y = labels[r];
    loss += lse - (y == 1 ? z1 : z0);
    if (grad) {
      const double d0 = std::exp(z0 - lse) - (y == 0 ? 1.0 : 0.0);
      const double d1 = std::exp(z1 - lse) - (y == 1 ? 1.0 : 0.0);
      double* g0 = grad->weights.data();
      double* g1 = g0 + d;
      for (std::size_t j = 0; j < d; ++j) {
        g0[j] += d0 * xr[j];
        g1[j] += d1 * xr[j];
      }
      grad->bias[0] += d0;
      grad->bias[1] += d1;
    }
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  if (grad) {
    for (double& g : grad->weights) g *= inv;
    grad->bias[0] *= inv;
    grad->bias[1] *= inv;
  }
  return loss * inv;
}

std::array<double, 2> predict_proba(const LinearRubricModel& model,
                                    std::span<const double> embedding) {
  check_dim(model, embedding);
  const auto [z0, z1] = logits(model.params, embedding);
  const double m = std::max(z0, z1);
  const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
  return {std::exp(z0 - lse), std::exp(z1 - lse)};
}

int predict(const LinearRubricModel& model, std::span<const double> embedding) {
  const auto p = predict_proba(model, embedding);
  return p[1] > p[0] ? 1 : 0;
}

LinearRubricModel train_rubric_model(const FeatureMatrix& x,
                                     std::span<const std::uint8_t> labels,
                                     const TrainConfig& cfg, int total_epochs,
                                     const TrainHooks& hooks) {
  cfg.validate();
  const std::size_t n = x.rows();
  if (n == 0) throw Error(ErrorKind::Input, "train_rubric_model: no training rows");
  if (labels.size() != n)
    throw Error(ErrorKind::Input, "train_rubric_model: " + std::to_string(labels.size()) +
                                      " labels for " + std::to_string(n) + " rows");
  for (auto y : labels)
    if (y > 1) throw Error(ErrorKind::Input, "train_rubric_model: labels must be 0 or 1");
  if (total_epochs < 1)
    throw Error(ErrorKind::Input, "train_rubric_model: total_epochs must be positive");

  LinearRubricModel model;
  model.params = SoftmaxParams::zeros(x.dim());
  model.trained_epochs = total_epochs;
  model.seed = cfg.seed;

  PortableRng rng(cfg.seed);
  std::vector<std::size_t> order(n);
  SoftmaxParams grad;
  double mean_loss = 0.0;
  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    const double lr = hooks.schedule ? hooks.schedule(epoch, total_epochs)
                                     : lr_at(epoch, total_epochs, cfg);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(order), rng);

    double loss_sum = 0.0;
    for (std::size_t lo = 0; lo < n; lo += cfg.batch_size) {
      const std::size_t hi = std::min(n, lo + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + lo, hi - lo);
      const double loss = softmax_cross_entropy(model.params, x, labels, rows, &grad);
      if (!std::isfinite(loss))
        throw Error(ErrorKind::Training,
                    "training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                        " (learning rate " + std::to_string(lr) +
                        "); reduce peak_lr or rescale the embeddings");
      loss_sum += loss * static_cast<double>(rows.size());
      for (std::size_t j = 0; j < model.params.weights.size(); ++j)
        model.params.weights[j] -= lr * grad.weights[j];
      model.params.bias[0] -= lr * grad.bias[0];
      model.params.bias[1] -= lr * grad.bias[1];
    }
    mean_loss = loss_sum / static_cast<double>(n);
    if (hooks.on_epoch) hooks.on_epoch(EpochStats{epoch, lr, mean_loss});
  }
  if (!all_finite(model.params))
    throw Error(ErrorKind::Training, "training produced non-finite parameters");
  model.train_loss_final = mean_loss;
  return model;
}

void ProblemGrader::validate() const {
  const std::size_t d = models[0].dim();
  if (d == 0) throw Error(ErrorKind::Format, "grader has zero-dimensional models");
  for (std::size_t i = 0; i < kRubricCount; ++i) {
    const auto& m = models[i];
    if (m.rubric != i)
      throw Error(ErrorKind::Format, "grader slot " + rubric_label(i) +
                                         " holds the model for " + rubric_label(m.rubric));
    if (m.dim() != d || m.params.weights.size() != 2 * d)
      throw Error(ErrorKind::Format, "grader model " + rubric_label(i) +
                                         " has inconsistent dimension");
    if (m.provider_id != provider_id || m.problem_id != problem_id)
      throw Error(ErrorKind::Format, "grader model " + rubric_label(i) +
                                         " has inconsistent problem or provider id");
    if (!all_finite(m.params))
      throw Error(ErrorKind::Format, "grader model " + rubric_label(i) +
                                         " has non-finite parameters");
  }
}

RubricVector ProblemGrader::predict(std::span<const double> embedding) const {
  RubricVector out;
  for (std::size_t i = 0; i < kRubricCount; ++i)
    out.bits[i] = static_cast<std::uint8_t>(proofgrade::predict(models[i], embedding));
  return out;
}

std::vector<std::uint8_t> LabeledFeatures::rubric_labels(std::size_t rubric) const {
  std::vector<std::uint8_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i][rubric];
  return out;
}

LabeledFeatures LabeledFeatures::subset(std::span<const std::size_t> indices) const {
  LabeledFeatures out;
  out.x = x.subset(indices);
  for (std::size_t i : indices) {
    out.labels.push_back(labels[i]);
    out.ids.push_back(ids[i]);
  }
  return out;
}

LabeledFeatures embed_records(std::span<const ProofRecord> records, Embedder& embedder) {
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const auto& r : records) texts.push_back(r.body_markdown);
  const auto vectors = embedder.embed_all(texts);

  LabeledFeatures out;
  out.x = FeatureMatrix(0, embedder.provider().dim());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.x.append_row(vectors[i].values);
    out.labels.push_back(collapse_labels(records[i].raw_labels));
    out.ids.push_back(records[i].proof_id);
  }
  return out;
}

TrainedGrader train_problem_grader(const std::string& problem_id,
                                   const std::string& provider_id,
                                   const LabeledFeatures& train,
                                   const LabeledFeatures& selection,
                                   const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() == 0)
    throw Error(ErrorKind::Input, "no training examples for problem " + problem_id);
  if (selection.size() == 0)
    throw Error(ErrorKind::Input, "no selection examples for problem " + problem_id);
  if (train.x.dim() != selection.x.dim())
    throw Error(ErrorKind::Input, "training and selection features differ in dimension");

  TrainedGrader out;
  out.grader.problem_id = problem_id;
  out.grader.provider_id = provider_id;

  auto train_one = [&](std::size_t rubric) {
    TrainConfig rubric_cfg = cfg;
    rubric_cfg.seed = cfg.seed + rubric;
    const auto y = train.rubric_labels(rubric);
    const auto y_sel = selection.rubric_labels(rubric);

    RubricSelection sel;
    sel.rubric = rubric;
    LinearRubricModel best;
    double best_acc = -1.0;
    for (int epochs : cfg.epochs_grid) {
      LinearRubricModel m = train_rubric_model(train.x, y, rubric_cfg, epochs);
      const double acc = selection_accuracy(m, selection.x, y_sel);
      sel.epochs.push_back(epochs);
      sel.accuracies.push_back(acc);
      if (acc > best_acc) {
        best_acc = acc;
        best = std::move(m);
      }
    }
    best.rubric = rubric;
    best.problem_id = problem_id;
    best.provider_id = provider_id;
    sel.selected_epochs = best.trained_epochs;
    sel.selected_accuracy = best_acc;
    out.grader.models[rubric] = std::move(best);
    out.report.rubrics[rubric] = std::move(sel);
  };

  const unsigned workers =
      std::min<unsigned>(cfg.threads, static_cast<unsigned>(kRubricCount));
  if (workers <= 1) {
    for (std::size_t r = 0; r < kRubricCount; ++r) train_one(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
          for (std::size_t r = next++; r < kRubricCount; r = next++) {
            try {
              train_one(r);
            } catch (...) {
              std::lock_guard lock(failure_mutex);
              if (!failure) failure = std::current_exception();
            }
          }
        });
    }
    if (failure) std::rethrow_exception(failure);
  }
  return out;
}

TrainedGrader train_problem_grader(std::span<const ProofRecord> records,
                                   const DatasetSplit& split,
                                   const std::string& problem_id, Embedder& embedder,
                                   const TrainConfig& cfg) {
  const auto problem_records = filter_problem(records, problem_id);
  auto pick = [&](const std::vector<std::string>& ids) {
    std::unordered_set<std::string_view> wanted(ids.begin(), ids.end());
    std::vector<ProofRecord> out;
    for (const auto& r : problem_records)
      if (wanted.contains(r.proof_id)) out.push_back(r);
    return out;
  };
  const auto train_records = pick(split.train_ids);
  const auto selection_records = pick(cfg.selection_split == SelectionSplit::Test
                                          ? split.test_ids
                                          : split.validation_ids);
  if (train_records.empty() || selection_records.empty())
    throw Error(ErrorKind::Input, "split has no training or selection examples for problem " +
                                      problem_id);
  const auto train = embed_records(train_records, embedder);
  const auto selection = embed_records(selection_records, embedder);
  return train_problem_grader(problem_id, embedder.provider().id(), train, selection, cfg);
}

GradeResult grade_proof(const ProblemGrader& grader, std::string_view body_markdown,
                        Embedder& embedder) {
  if (grader.provider_id != embedder.provider().id())
    throw Error(ErrorKind::Conflict, "grader for provider '" + grader.provider_id +
                                         "' cannot grade with provider '" +
                                         embedder.provider().id() + "'");
  GradeResult result;
  if (normalize(body_markdown).empty()) {
    result.empty_submission = true;
    return result;
  }
  const EmbeddingVector v = embedder.embed(body_markdown);
  result.rubric = grader.predict(v.values);
  return result;
}

}  // namespace proofgrade
