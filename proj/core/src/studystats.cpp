#include "proofgrade/studystats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "proofgrade/error.hpp"
#include "proofgrade/special_functions.hpp"

namespace proofgrade {
namespace {

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x))
      throw Error(ErrorKind::Statistics, std::string(what) + " contains a non-finite value");
}

struct Ranked {
  std::vector<double> ranks;  // same order as the pooled input
  double tie_term = 0.0;      // sum over tie groups of t^3 - t
};

Ranked average_ranks(std::span<const double> pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  Ranked out;
  out.ranks.assign(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && pooled[order[j]] == pooled[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) out.ranks[order[k]] = avg;
    const double t = static_cast<double>(j - i);
    out.tie_term += t * t * t - t;
    i = j;
  }
  return out;
}

}  // namespace

std::string_view to_string(ExclusionReason reason) noexcept {
  switch (reason) {
    case ExclusionReason::NoAttempts: return "no_attempts";
    case ExclusionReason::AllBlank: return "all_blank";
    case ExclusionReason::AllTrivial: return "all_trivial";
  }
  return "unknown";
}

std::size_t substantive_chars(std::string_view text) {
  std::size_t count = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) == 0x80) continue;  // UTF-8 continuation byte
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') continue;
    ++count;
  }
  return count;
}

EffortReport screen_effort(std::span<const Attempt> attempts, std::size_t min_chars,
                           std::span<const std::string> roster) {
  struct Seen {
    bool any_attempt = false;
    bool any_nonblank = false;
    bool any_substantive = false;
  };
  std::map<std::string, Seen, std::less<>> students;
  for (const auto& id : roster) students[id];
  for (const auto& a : attempts) {
    auto& s = students[a.student_id];
    s.any_attempt = true;
    const std::size_t chars = substantive_chars(a.body_markdown);
    if (chars > 0) s.any_nonblank = true;
    if (chars >= min_chars) s.any_substantive = true;
  }
  EffortReport report;
  for (const auto& [id, s] : students) {
    if (s.any_substantive) {
      report.included.push_back(id);
    } else if (!s.any_attempt) {
      report.excluded.push_back({id, ExclusionReason::NoAttempts});
    } else if (!s.any_nonblank) {
      report.excluded.push_back({id, ExclusionReason::AllBlank});
    } else {
      report.excluded.push_back({id, ExclusionReason::AllTrivial});
    }
  }
  return report;
}

std::vector<InitialBest> initial_best(std::span<const Attempt> attempts) {
  std::vector<const Attempt*> scored;
  for (const auto& a : attempts)
    if (a.score_percent) scored.push_back(&a);
  std::stable_sort(scored.begin(), scored.end(), [](const Attempt* x, const Attempt* y) {
    if (x->student_id != y->student_id) return x->student_id < y->student_id;
    if (x->problem_id != y->problem_id) return x->problem_id < y->problem_id;
    if (x->ts_ms != y->ts_ms) return x->ts_ms < y->ts_ms;
    return x->attempt_index < y->attempt_index;
  });
  std::vector<InitialBest> out;
  for (const Attempt* a : scored) {
    if (out.empty() || out.back().student_id != a->student_id ||
        out.back().problem_id != a->problem_id) {
      out.push_back({a->student_id, a->problem_id, a->group, *a->score_percent,
                     *a->score_percent, 1});
    } else {
      auto& cur = out.back();
      cur.best = std::max(cur.best, *a->score_percent);
      ++cur.attempts;
    }
  }
  return out;
}

KruskalWallisResult kruskal_wallis(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2)
    throw Error(ErrorKind::Statistics, "Kruskal-Wallis needs at least two groups");
  std::vector<double> pooled;
  for (const auto& g : groups) {
    if (g.empty()) throw Error(ErrorKind::Statistics, "Kruskal-Wallis group is empty");
    require_finite(g, "Kruskal-Wallis sample");
    pooled.insert(pooled.end(), g.begin(), g.end());
  }
  const double n = static_cast<double>(pooled.size());
  if (pooled.size() < 3)
    throw Error(ErrorKind::Statistics, "Kruskal-Wallis needs at least three observations");

  KruskalWallisResult res;
  res.df = groups.size() - 1;
  const Ranked ranked = average_ranks(pooled);
  const double correction = 1.0 - ranked.tie_term / (n * n * n - n);
  if (correction <= 0.0) {
    res.degenerate = true;
    return res;
  }
  double sum = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double r = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) r += ranked.ranks[offset + i];
    offset += g.size();
    sum += r * r / static_cast<double>(g.size());
  }
  const double h = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);
  res.h = std::max(0.0, h / correction);
  res.p = chi_square_sf(res.h, static_cast<double>(res.df));
  return res;
}

MannWhitneyResult mann_whitney(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty())
    throw Error(ErrorKind::Statistics, "Mann-Whitney needs two non-empty samples");
  require_finite(a, "Mann-Whitney sample");
  require_finite(b, "Mann-Whitney sample");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const Ranked ranked = average_ranks(pooled);
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  const double n = n1 + n2;
  double r1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r1 += ranked.ranks[i];

  MannWhitneyResult res;
  res.u = r1 - n1 * (n1 + 1.0) / 2.0;
  const double mu = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - ranked.tie_term / (n * (n - 1.0)));
  if (!(var > 0.0)) return res;
  const double d = res.u - mu;
  if (std::fabs(d) <= 0.5) return res;
  res.z = (d - std::copysign(0.5, d)) / std::sqrt(var);
  res.p = std::min(1.0, normal_two_sided(res.z));
  return res;
}

std::vector<PairwiseComparison> posthoc_mann_whitney(
    std::span<const std::vector<double>> groups) {
  std::vector<PairwiseComparison> out;
  for (std::size_t i = 0; i < groups.size(); ++i)
    for (std::size_t j = i + 1; j < groups.size(); ++j)
      out.push_back({i, j, mann_whitney(groups[i], groups[j]), 1.0});
  const double m = static_cast<double>(out.size());
  for (auto& c : out) c.p_adjusted = std::min(1.0, c.test.p * m);
  return out;
}

TTestResult welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw Error(ErrorKind::Statistics, "Welch t-test needs at least two values per sample");
  require_finite(a, "t-test sample");
  require_finite(b, "t-test sample");
  const double va = sample_variance(a) / static_cast<double>(a.size());
  const double vb = sample_variance(b) / static_cast<double>(b.size());
  const double se2 = va + vb;
  if (!(se2 > 0.0))
    throw Error(ErrorKind::Statistics, "Welch t-test is undefined when both samples are constant");
  TTestResult res;
  res.t = (mean(a) - mean(b)) / std::sqrt(se2);
  res.df = se2 * se2 /
           (va * va / static_cast<double>(a.size() - 1) +
            vb * vb / static_cast<double>(b.size() - 1));
  res.p = student_t_two_sided(res.t, res.df);
  return res;
}

TTestResult paired_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorKind::Statistics, "paired t-test needs samples of equal length");
  if (a.size() < 2) throw Error(ErrorKind::Statistics, "paired t-test needs at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  require_finite(d, "paired t-test sample");
  const double var = sample_variance(d);
  if (!(var > 0.0))
    throw Error(ErrorKind::Statistics, "paired t-test is undefined when all differences are equal");
  TTestResult res;
  const double n = static_cast<double>(d.size());
  res.t = mean(d) / std::sqrt(var / n);
  res.df = n - 1.0;
  res.p = student_t_two_sided(res.t, res.df);
  return res;
}

AnovaResult anova_oneway(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2) throw Error(ErrorKind::Statistics, "ANOVA needs at least two groups");
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw Error(ErrorKind::Statistics, "ANOVA needs two values per group");
    require_finite(g, "ANOVA sample");
    total += std::accumulate(g.begin(), g.end(), 0.0);
    n += g.size();
  }
  const double grand = total / static_cast<double>(n);
  double ssb = 0.0;
  double ssw = 0.0;
  for (const auto& g : groups) {
    const double m = mean(g);
    ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double x : g) ssw += (x - m) * (x - m);
  }
  if (!(ssw > 0.0))
    throw Error(ErrorKind::Statistics, "ANOVA is undefined with zero within-group variance");
  AnovaResult res;
  res.df_between = static_cast<double>(groups.size() - 1);
  res.df_within = static_cast<double>(n - groups.size());
  res.f = (ssb / res.df_between) / (ssw / res.df_within);
  res.p = f_sf(res.f, res.df_between, res.df_within);
  return res;
}

double cronbach_alpha(std::span<const std::vector<double>> items) {
  if (items.size() < 2) throw Error(ErrorKind::Statistics, "Cronbach's alpha needs two respondents");
  const std::size_t k = items.front().size();
  if (k < 2) throw Error(ErrorKind::Statistics, "Cronbach's alpha needs two items");
  std::vector<double> totals;
  std::vector<std::vector<double>> columns(k);
  for (const auto& row : items) {
    if (row.size() != k)
      throw Error(ErrorKind::Statistics, "Cronbach's alpha rows differ in length");
    require_finite(row, "Cronbach's alpha item");
    totals.push_back(std::accumulate(row.begin(), row.end(), 0.0));
    for (std::size_t c = 0; c < k; ++c) columns[c].push_back(row[c]);
  }
  const double total_var = sample_variance(totals);
  if (!(total_var > 0.0))
    throw Error(ErrorKind::Statistics, "Cronbach's alpha is undefined with zero total variance");
  double item_var = 0.0;
  for (const auto& col : columns) item_var += sample_variance(col);
  const double kd = static_cast<double>(k);
  return kd / (kd - 1.0) * (1.0 - item_var / total_var);
}

OlsResult ols_fit(std::span<const double> x, std::size_t cols, std::span<const double> y,
                  std::vector<std::string> names) {
  const std::size_t n = y.size();
  const std::size_t p = cols;
  if (p == 0) throw Error(ErrorKind::Statistics, "regression has no columns");
  if (x.size() != n * p) throw Error(ErrorKind::Statistics, "design matrix shape mismatch");
  if (names.size() != p) throw Error(ErrorKind::Statistics, "one name per column is required");
  if (n <= p)
    throw Error(ErrorKind::Statistics, "regression needs more observations than parameters");
  require_finite(x, "design matrix");
  require_finite(y, "response");

  // Augmented [X'X | X'y | I], width p + 1 + p.
  const std::size_t w = 2 * p + 1;
  std::vector<double> m(p * w, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = x.data() + r * p;
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < p; ++j) m[i * w + j] += row[i] * row[j];
      m[i * w + p] += row[i] * y[r];
    }
  }
  double max_diag = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    m[i * w + p + 1 + i] = 1.0;
    max_diag = std::max(max_diag, m[i * w + i]);
  }
  const double tol = 1e-10 * max_diag;
  std::vector<std::size_t> column_of_row(p);
  std::iota(column_of_row.begin(), column_of_row.end(), 0);
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t pivot = c;
    for (std::size_t r = c + 1; r < p; ++r)
      if (std::fabs(m[r * w + c]) > std::fabs(m[pivot * w + c])) pivot = r;
    if (!(std::fabs(m[pivot * w + c]) > tol))
      throw Error(ErrorKind::Statistics,
                  "design matrix is rank deficient at column '" + names[c] + "'");
    if (pivot != c)
      for (std::size_t k = 0; k < w; ++k) std::swap(m[c * w + k], m[pivot * w + k]);
    const double inv = 1.0 / m[c * w + c];
    for (std::size_t k = 0; k < w; ++k) m[c * w + k] *= inv;
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const double f = m[r * w + c];
      if (f == 0.0) continue;
      for (std::size_t k = 0; k < w; ++k) m[r * w + k] -= f * m[c * w + k];
    }
  }

  OlsResult res;
  res.names = std::move(names);
  res.n = n;
  res.df_resid = n - p;
  res.coefficients.resize(p);
  for (std::size_t i = 0; i < p; ++i) res.coefficients[i] = m[i * w + p];

  res.residuals.resize(n);
  double ssr = 0.0;
  const double ybar = mean(y);
  double sst = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double fitted = 0.0;
    for (std::size_t i = 0; i < p; ++i) fitted += x[r * p + i] * res.coefficients[i];
    res.residuals[r] = y[r] - fitted;
    ssr += res.residuals[r] * res.residuals[r];
    sst += (y[r] - ybar) * (y[r] - ybar);
  }
  res.sigma2 = ssr / static_cast<double>(res.df_resid);
  res.r_squared = sst > 0.0 ? 1.0 - ssr / sst : std::numeric_limits<double>::quiet_NaN();

  res.std_errors.resize(p);
  res.t.resize(p);
  res.p.resize(p);
  for (std::size_t i = 0; i < p; ++i) {
    const double var = res.sigma2 * m[i * w + p + 1 + i];
    res.std_errors[i] = std::sqrt(std::max(0.0, var));
    const double b = res.coefficients[i];
    if (res.std_errors[i] > 0.0) {
      res.t[i] = b / res.std_errors[i];
      res.p[i] = student_t_two_sided(res.t[i], static_cast<double>(res.df_resid));
    } else if (b == 0.0) {
      res.t[i] = 0.0;
      res.p[i] = 1.0;
    } else {
      res.t[i] = std::copysign(std::numeric_limits<double>::infinity(), b);
      res.p[i] = 0.0;
    }
  }
  return res;
}

ImprovementModel fit_improvement_model(std::span<const ImprovementObservation> rows) {
  ImprovementModel model;
  for (const auto& r : rows) model.problems.push_back(r.problem_id);
  std::sort(model.problems.begin(), model.problems.end());
  model.problems.erase(std::unique(model.problems.begin(), model.problems.end()),
                       model.problems.end());
  const std::size_t j = model.problems.size();
  const std::size_t cols = j + 3;
  std::vector<std::string> names;
  for (const auto& p : model.problems) names.push_back("mu_" + p);
  names.insert(names.end(), {"alpha", "beta1", "beta2"});

  std::vector<double> x(rows.size() * cols, 0.0);
  std::vector<double> y(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& o = rows[r];
    const auto it = std::lower_bound(model.problems.begin(), model.problems.end(), o.problem_id);
    double* row = x.data() + r * cols;
    row[static_cast<std::size_t>(it - model.problems.begin())] = 1.0;
    row[j] = o.initial;
    row[j + 1] = o.group == Strategy::RandomIncorrect ? 1.0 : 0.0;
    row[j + 2] = o.group == Strategy::FirstIncorrect ? 1.0 : 0.0;
    y[r] = o.best;
  }
  model.fit = ols_fit(x, cols, y, std::move(names));
  return model;
}

std::vector<ImprovementObservation> improvement_observations(
    std::span<const InitialBest> summaries) {
  std::vector<ImprovementObservation> out;
  out.reserve(summaries.size());
  for (const auto& s : summaries) out.push_back({s.best, s.initial, s.problem_id, s.group});
  return out;
}

const std::set<std::string, std::less<>>& default_negatively_worded() {
  static const std::set<std::string, std::less<>> kItems{"S04", "S05"};
  return kItems;
}

std::vector<int> code_likert(std::span<const LikertResponse> responses,
                             const std::set<std::string, std::less<>>& negatively_worded) {
  std::vector<int> out;
  out.reserve(responses.size());
  for (const auto& r : responses) {
    if (r.value < -2 || r.value > 2)
      throw Error(ErrorKind::Input, "Likert value " + std::to_string(r.value) + " for " +
                                        r.question_id + " is outside -2..2");
    const bool reverse = r.reverse_coded || negatively_worded.count(r.question_id) > 0;
    out.push_back(reverse ? -r.value : r.value);
  }
  return out;
}

}  // namespace proofgrade
