#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "proofgrade/error.hpp"
#include "proofgrade/prng.hpp"
#include "proofgrade/special_functions.hpp"
#include "proofgrade/studystats.hpp"

using namespace proofgrade;

namespace {

Attempt make_attempt(const std::string& student, Strategy group, const std::string& problem,
                     std::int64_t ts, std::optional<double> score, const std::string& body) {
  Attempt a;
  a.student_id = student;
  a.group = group;
  a.problem_id = problem;
  a.ts_ms = ts;
  a.score_percent = score;
  a.body_markdown = body;
  a.body_hash = "h" + std::to_string(ts);
  return a;
}

const std::string kProof =
    "Base case n = 1 holds. Assume P(k) holds; then P(k+1) follows by the hypothesis.";

std::vector<double> sample(PortableRng& rng, std::size_t n, double shift) {
  std::vector<double> v(n);
  for (auto& x : v) x = shift + rng.normal();
  return v;
}

}  // namespace

TEST(KruskalWallis, HandExample) {
  std::vector<std::vector<double>> g{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  const auto r = kruskal_wallis(g);
  EXPECT_NEAR(r.h, 7.2, 1e-12);
  EXPECT_EQ(r.df, 2u);
  EXPECT_NEAR(r.p, std::exp(-3.6), 1e-12);
  EXPECT_FALSE(r.degenerate);
}

TEST(KruskalWallis, MatchesRankSumFormulaWithoutTies) {
  PortableRng rng(8);
  for (int it = 0; it < 200; ++it) {
    std::vector<std::vector<double>> g(2 + rng.bounded(3));
    for (auto& grp : g) grp = sample(rng, 1 + rng.bounded(8), 0.0);
    std::size_t n = 0;
    for (const auto& grp : g) n += grp.size();
    if (n < 3) continue;
    EXPECT_NEAR(kruskal_wallis(g).h, oracle::kruskal_h_no_ties(g), 1e-9);
  }
}

TEST(KruskalWallis, InvariantUnderMonotoneTransform) {
  PortableRng rng(9);
  for (int it = 0; it < 200; ++it) {
    std::vector<std::vector<double>> g(3);
    for (auto& grp : g) {
      grp.resize(2 + rng.bounded(6));
      for (auto& v : grp) v = static_cast<double>(rng.bounded(6));  // many ties
    }
    auto t = g;
    for (auto& grp : t)
      for (auto& v : grp) v = std::exp(v / 2) * 3 - 7;
    const auto a = kruskal_wallis(g), b = kruskal_wallis(t);
    EXPECT_EQ(a.degenerate, b.degenerate);
    EXPECT_NEAR(a.h, b.h, 1e-9);
    EXPECT_NEAR(a.p, b.p, 1e-12);
  }
}

TEST(KruskalWallis, TiesAndDegenerate) {
  std::vector<std::vector<double>> same{{5, 5}, {5, 5, 5}};
  const auto r = kruskal_wallis(same);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.h, 0.0);
  EXPECT_EQ(r.p, 1.0);
  // Ties: {1,1,2},{2,3,3}; ranks 1.5,1.5,3.5 | 3.5,5.5,5.5
  std::vector<std::vector<double>> tied{{1, 1, 2}, {2, 3, 3}};
  const double h_raw = 12.0 / 42.0 * (6.5 * 6.5 / 3 + 14.5 * 14.5 / 3) - 21.0;
  const double c = 1.0 - 3.0 * 6.0 / (216.0 - 6.0);
  EXPECT_NEAR(kruskal_wallis(tied).h, h_raw / c, 1e-12);
  std::vector<std::vector<double>> one{{1, 2, 3}};
  EXPECT_THROW(kruskal_wallis(one), Error);
}

TEST(MannWhitney, BruteForceUAndNormalApproximation) {
  PortableRng rng(10);
  for (int it = 0; it < 200; ++it) {
    std::vector<double> a(1 + rng.bounded(10)), b(1 + rng.bounded(10));
    for (auto& v : a) v = static_cast<double>(rng.bounded(7));
    for (auto& v : b) v = static_cast<double>(rng.bounded(7));
    double u = 0;
    for (double x : a)
      for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
    const auto r = mann_whitney(a, b);
    EXPECT_NEAR(r.u, u, 1e-9);

    std::vector<double> all = a;
    all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    double ties = 0;
    for (std::size_t i = 0; i < all.size();) {
      std::size_t j = i;
      while (j < all.size() && all[j] == all[i]) ++j;
      const double t = static_cast<double>(j - i);
      ties += t * t * t - t;
      i = j;
    }
    const double n1 = a.size(), n2 = b.size(), n = n1 + n2;
    const double var = n1 * n2 / 12.0 * ((n + 1) - ties / (n * (n - 1)));
    if (var <= 0) {
      EXPECT_EQ(r.p, 1.0);
      continue;
    }
    const double diff = u - n1 * n2 / 2;
    const double corrected = std::copysign(std::max(0.0, std::fabs(diff) - 0.5), diff);
    EXPECT_NEAR(r.z, corrected / std::sqrt(var), 1e-9);
    EXPECT_NEAR(r.p, std::erfc(std::fabs(r.z) / std::sqrt(2.0)), 1e-12);
  }
}

TEST(MannWhitney, PosthocBonferroni) {
  std::vector<std::vector<double>> g{{1, 2, 3, 4}, {5, 6, 7, 8}, {2, 3, 4, 5}};
  const auto pairs = posthoc_mann_whitney(g);
  ASSERT_EQ(pairs.size(), 3u);
  for (const auto& p : pairs) {
    EXPECT_LT(p.group_a, p.group_b);
    EXPECT_NEAR(p.p_adjusted, std::min(1.0, 3 * p.test.p), 1e-15);
  }
}

TEST(WelchT, ClosedFormAndAntisymmetry) {
  PortableRng rng(11);
  for (int it = 0; it < 200; ++it) {
    const auto a = sample(rng, 2 + rng.bounded(15), 0.0);
    const auto b = sample(rng, 2 + rng.bounded(15), rng.normal());
    auto stats = [](const std::vector<double>& v) {
      long double m = 0, s = 0;
      for (double x : v) m += x;
      m /= v.size();
      for (double x : v) s += (x - m) * (x - m);
      return std::pair<double, double>(m, s / (v.size() - 1));
    };
    const auto [ma, va] = stats(a);
    const auto [mb, vb] = stats(b);
    const double se2 = va / a.size() + vb / b.size();
    const double t = (ma - mb) / std::sqrt(se2);
    const double df = se2 * se2 / (va * va / (a.size() * a.size() * (a.size() - 1.0)) +
                                   vb * vb / (b.size() * b.size() * (b.size() - 1.0)));
    const auto r = welch_t(a, b);
    EXPECT_NEAR(r.t, t, 1e-9 * std::max(1.0, std::fabs(t)));
    EXPECT_NEAR(r.df, df, 1e-9 * df);
    const auto s = welch_t(b, a);
    EXPECT_EQ(s.t, -r.t);
    EXPECT_NEAR(s.p, r.p, 1e-15);
    EXPECT_NEAR(s.df, r.df, 1e-12 * r.df);
  }
  std::vector<double> x{1, 2, 3, 4};
  const auto same = welch_t(x, x);
  EXPECT_EQ(same.t, 0.0);
  EXPECT_NEAR(same.p, 1.0, 1e-15);
  std::vector<double> zeros{0, 0, 0, 0}, ones{1, 1, 1, 1};
  EXPECT_THROW(welch_t(zeros, ones), Error);
  std::vector<double> z2{0, 1e-9, 0, -1e-9}, o2{1, 1 + 1e-9, 1, 1 - 1e-9};
  const auto sep = welch_t(z2, o2);
  EXPECT_LT(sep.t, -1e6);
  EXPECT_LT(sep.p, 1e-10);
}

TEST(PairedT, MatchesOneSampleOnDifferences) {
  std::vector<double> a{3, 5, 4, 6, 7}, b{1, 4, 4, 3, 5};
  // differences 2,1,0,3,2: mean 1.6, sd sqrt(1.3)
  const auto r = paired_t(a, b);
  EXPECT_NEAR(r.t, 1.6 / std::sqrt(1.3 / 5), 1e-12);
  EXPECT_EQ(r.df, 4.0);
  EXPECT_NEAR(r.p, student_t_two_sided(r.t, 4), 1e-15);
}

TEST(Anova, HandExample) {
  std::vector<std::vector<double>> g{{0, 0, 1}, {10, 10, 11}, {20, 20, 21}};
  const auto r = anova_oneway(g);
  EXPECT_NEAR(r.f, 900.0, 1e-9);
  EXPECT_EQ(r.df_between, 2.0);
  EXPECT_EQ(r.df_within, 6.0);
  EXPECT_LT(r.p, 0.01);
  // Closed form for F(2, d2): p = (1 + 2F/d2)^(-d2/2).
  EXPECT_NEAR(r.p, std::pow(1.0 + 2.0 * 900.0 / 6.0, -3.0), 1e-15);
  std::vector<std::vector<double>> flat{{1, 1}, {2, 2}};
  EXPECT_THROW(anova_oneway(flat), Error);
}

TEST(Anova, NearlyIdenticalGroupsGiveSmallF) {
  PortableRng rng(12);
  std::vector<std::vector<double>> g(3);
  for (auto& grp : g) {
    grp.resize(30);
    for (auto& v : grp) v = 5.0 + 1e-6 * rng.normal();
  }
  EXPECT_LT(anova_oneway(g).f, 10.0);
}

TEST(CronbachAlpha, IdenticalColumnsAndInvariance) {
  PortableRng rng(13);
  std::vector<std::vector<double>> rows(40);
  for (auto& r : rows) {
    const double v = rng.normal();
    r = {v, v, v, v};
  }
  EXPECT_NEAR(cronbach_alpha(rows), 1.0, 1e-12);

  std::vector<std::vector<double>> noisy(60);
  for (auto& r : noisy) {
    const double base = rng.normal();
    r = {base + rng.normal(), base + rng.normal(), base + rng.normal()};
  }
  auto shifted = noisy;
  for (auto& r : shifted) r[1] += 17.0;
  EXPECT_NEAR(cronbach_alpha(noisy), cronbach_alpha(shifted), 1e-12);
}

TEST(CronbachAlpha, IndependentColumnsNearZero) {
  PortableRng rng(14);
  std::vector<std::vector<double>> rows(5000);
  for (auto& r : rows) r = {rng.normal(), rng.normal(), rng.normal(), rng.normal(), rng.normal()};
  EXPECT_NEAR(cronbach_alpha(rows), 0.0, 0.1);
}

TEST(Ols, RecoversNoiselessCoefficientsAndOrthogonalResiduals) {
  PortableRng rng(15);
  const std::vector<std::string> problems{"P1", "P2", "P3"};
  const double mu[3] = {26.5, 20.2, 20.0};
  const double alpha = 0.693, b1 = 11.3, b2 = 11.6;
  std::vector<ImprovementObservation> rows;
  for (int i = 0; i < 90; ++i) {
    ImprovementObservation o;
    const std::size_t j = rng.bounded(3);
    o.problem_id = problems[j];
    o.group = static_cast<Strategy>(rng.bounded(3));
    o.initial = 100.0 * static_cast<double>(rng.bounded(8)) / 7.0;
    o.best = mu[j] + alpha * o.initial + (o.group == Strategy::RandomIncorrect ? b1 : 0.0) +
             (o.group == Strategy::FirstIncorrect ? b2 : 0.0);
    rows.push_back(o);
  }
  const auto m = fit_improvement_model(rows);
  ASSERT_EQ(m.problems, problems);
  const auto& f = m.fit;
  ASSERT_EQ(f.names, (std::vector<std::string>{"mu_P1", "mu_P2", "mu_P3", "alpha", "beta1", "beta2"}));
  const double expected[] = {mu[0], mu[1], mu[2], alpha, b1, b2};
  for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(f.coefficients[k], expected[k], 1e-9);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
}

TEST(Ols, ResidualsOrthogonalToDesign) {
  PortableRng rng(16);
  for (int it = 0; it < 20; ++it) {
    const std::size_t n = 30 + rng.bounded(50), p = 2 + rng.bounded(4);
    std::vector<double> x(n * p), y(n);
    for (auto& v : x) v = rng.normal() * 10;
    for (auto& v : y) v = rng.normal() * 5 + 3;
    std::vector<std::string> names;
    for (std::size_t k = 0; k < p; ++k) names.push_back("x" + std::to_string(k));
    const auto f = ols_fit(x, p, y, names);
    for (std::size_t c = 0; c < p; ++c) {
      long double dot = 0;
      for (std::size_t i = 0; i < n; ++i) dot += x[i * p + c] * f.residuals[i];
      EXPECT_LE(std::fabs(static_cast<double>(dot)), 1e-9);
    }
    for (std::size_t c = 0; c < p; ++c) {
      EXPECT_NEAR(f.t[c], f.coefficients[c] / f.std_errors[c], 1e-12 * std::fabs(f.t[c]) + 1e-15);
      EXPECT_NEAR(f.p[c], student_t_two_sided(f.t[c], static_cast<double>(n - p)), 1e-15);
    }
    EXPECT_EQ(f.df_resid, n - p);
  }
}

TEST(Ols, NullEffectsStayWithinNoise) {
  PortableRng rng(17);
  int covered = 0, total = 0;
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<ImprovementObservation> rows;
    for (int i = 0; i < 120; ++i) {
      ImprovementObservation o;
      o.problem_id = i % 2 ? "P1" : "P2";
      o.group = static_cast<Strategy>(i % 3);
      o.initial = 100.0 * rng.uniform01();
      o.best = 20.0 + 0.7 * o.initial + 8.0 * rng.normal();
      rows.push_back(o);
    }
    const auto f = fit_improvement_model(rows).fit;
    for (std::size_t k : {f.names.size() - 2, f.names.size() - 1}) {
      ++total;
      covered += std::fabs(f.coefficients[k]) <= 1.96 * f.std_errors[k];
    }
  }
  // 95% nominal coverage over 80 intervals.
  EXPECT_GE(covered, 68);
}

TEST(Ols, ReportsRankDeficientColumn) {
  std::vector<double> x{1, 2, 1, 2, 1, 2, 1, 2, 1, 2};  // 5 x 2, col b = 2a
  std::vector<double> y{1, 2, 3, 4, 5};
  try {
    ols_fit(x, 2, y, {"a", "b"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos) << e.what();
  }
}

TEST(PValues, MatchIntegrationOracleAtFixedPoints) {
  struct Chi { double x, df; };
  for (auto [x, df] : {Chi{7.2, 2}, Chi{10.95, 2}, Chi{3.0, 3}, Chi{9.49, 4}, Chi{0.4, 6}})
    EXPECT_NEAR(chi_square_sf(x, df), oracle::chi_square_sf(x, df), 1e-6) << x << " " << df;
  struct T { double t, df; };
  for (auto [t, df] : {T{2.0, 5}, T{0.5, 3}, T{4.37, 40}, T{1.0, 1}, T{-3.0, 12.5}})
    EXPECT_NEAR(student_t_two_sided(t, df), oracle::student_t_two_sided(t, df), 1e-6) << t;
  struct F { double f, d1, d2; };
  for (auto [f, d1, d2] : {F{1.2, 2, 60}, F{900, 2, 6}, F{3.0, 4, 20}, F{0.5, 3, 10}, F{2.5, 2, 30}})
    EXPECT_NEAR(f_sf(f, d1, d2), oracle::f_sf(f, d1, d2), 1e-6) << f;
  for (double z : {0.5, 1.96, 3.0, -1.0, 2.5})
    EXPECT_NEAR(normal_two_sided(z), oracle::normal_two_sided(z), 1e-6) << z;
}

TEST(Likert, CodingAndParsing) {
  std::vector<LikertResponse> r(4);
  r[0] = {"s", Strategy::FirstIncorrect, "S04", 2, false};
  r[1] = {"s", Strategy::FirstIncorrect, "S01", 1, false};
  r[2] = {"s", Strategy::FirstIncorrect, "S05", 0, false};
  r[3] = {"s", Strategy::FirstIncorrect, "S02", -2, true};
  EXPECT_EQ(code_likert(r), (std::vector<int>{-2, 1, 0, 2}));
  r[0].value = 3;
  EXPECT_THROW(code_likert(r), Error);
  EXPECT_EQ(parse_likert_value("Strongly disagree"), -2);
  EXPECT_EQ(parse_likert_value("Disagree"), -1);
  EXPECT_EQ(parse_likert_value("neutral"), 0);
  EXPECT_EQ(parse_likert_value("Agree"), 1);
  EXPECT_EQ(parse_likert_value("2"), 2);
  EXPECT_THROW(parse_likert_value("5"), Error);
  EXPECT_THROW(parse_likert_value("maybe"), Error);
}

TEST(Survey, ParsesQuotedCsv) {
  std::istringstream in(
      "student_id,group,question_id,value\n"
      "s1,First,S01,Agree\n"
      "\"s,2\",Random,S04,\"Strongly disagree\"\n");
  const auto r = parse_survey_csv(in, "survey.csv");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[1].student_id, "s,2");
  EXPECT_EQ(r[1].group, Strategy::RandomIncorrect);
  EXPECT_EQ(r[1].value, -2);
  std::istringstream bad("student_id,group,value\n");
  EXPECT_THROW(parse_survey_csv(bad, "x"), Error);
}

TEST(EffortScreening, ExclusionRules) {
  std::vector<Attempt> a{
      make_attempt("hello", Strategy::FirstIncorrect, "P1", 1, 0.0, "hello"),
      make_attempt("hello", Strategy::FirstIncorrect, "P2", 2, 0.0, "hello"),
      make_attempt("blank", Strategy::FirstIncorrect, "P1", 3, 0.0, "  \n "),
      make_attempt("good", Strategy::SelfEval, "P1", 4, 0.0, "?"),
      make_attempt("good", Strategy::SelfEval, "P2", 5, 0.0, kProof),
  };
  const std::vector<std::string> roster{"absent", "good"};
  const auto rep = screen_effort(a, kDefaultMinChars, roster);
  EXPECT_EQ(rep.included, std::vector<std::string>{"good"});
  ASSERT_EQ(rep.excluded.size(), 3u);
  EXPECT_EQ(rep.excluded[0].student_id, "absent");
  EXPECT_EQ(rep.excluded[0].reason, ExclusionReason::NoAttempts);
  EXPECT_EQ(rep.excluded[1].reason, ExclusionReason::AllBlank);
  EXPECT_EQ(rep.excluded[2].student_id, "hello");
  EXPECT_EQ(rep.excluded[2].reason, ExclusionReason::AllTrivial);
  EXPECT_EQ(substantive_chars(" a b\n∑ "), 3u);
}

TEST(InitialBest, FirstAndMax) {
  std::vector<Attempt> a{
      make_attempt("s", Strategy::FirstIncorrect, "P1", 30, 42.9, kProof),
      make_attempt("s", Strategy::FirstIncorrect, "P1", 10, 28.6, kProof),
      make_attempt("s", Strategy::FirstIncorrect, "P1", 20, 57.1, kProof),
      make_attempt("s", Strategy::FirstIncorrect, "P1", 5, std::nullopt, kProof),
      make_attempt("s", Strategy::FirstIncorrect, "P2", 40, 100.0, kProof),
  };
  const auto r = initial_best(a);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].initial, 28.6);
  EXPECT_EQ(r[0].best, 57.1);
  EXPECT_EQ(r[0].attempts, 3u);
  EXPECT_EQ(r[1].initial, 100.0);
  EXPECT_EQ(r[1].best, 100.0);
}

TEST(InitialBest, BestDominatesInitial) {
  PortableRng rng(18);
  std::vector<Attempt> a;
  for (int i = 0; i < 500; ++i)
    a.push_back(make_attempt("s" + std::to_string(rng.bounded(20)), Strategy::FirstIncorrect,
                             "P" + std::to_string(rng.bounded(3)), static_cast<std::int64_t>(rng.bounded(1000)),
                             100.0 * static_cast<double>(rng.bounded(8)) / 7.0, kProof));
  for (const auto& s : initial_best(a)) EXPECT_GE(s.best, s.initial);
}

TEST(AttemptLogFormat, JsonLineRoundTrip) {
  Attempt a = make_attempt("s\"1", Strategy::RandomIncorrect, "P2", 1700000000123, 500.0 / 7.0,
                           "line one\nline \"two\"");
  a.attempt_index = 3;
  a.rubric = fixture::bits("1001111");
  a.revealed_rubric = 2;
  a.latency_ms = 12.5;
  const std::string line = attempt_to_json_line(a);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  const auto b = attempt_from_json_line(line, "t");
  EXPECT_EQ(b.student_id, a.student_id);
  EXPECT_EQ(b.group, a.group);
  EXPECT_EQ(b.ts_ms, a.ts_ms);
  EXPECT_EQ(b.score_percent, a.score_percent);
  EXPECT_EQ(b.rubric, a.rubric);
  EXPECT_EQ(b.revealed_rubric, a.revealed_rubric);
  EXPECT_EQ(b.body_markdown, a.body_markdown);
  EXPECT_EQ(b.attempt_index, 3u);
  EXPECT_THROW(attempt_from_json_line("{}", "t"), Error);
}

TEST(StudyTables, BuildsEveryTable) {
  PortableRng rng(19);
  std::vector<Attempt> attempts;
  std::vector<LikertResponse> survey;
  std::int64_t ts = 0;
  for (int s = 0; s < 45; ++s) {
    const std::string id = "st" + std::to_string(s);
    const auto group = static_cast<Strategy>(s % 3);
    for (const char* p : {"P1", "P2", "P3"}) {
      const int n = 1 + static_cast<int>(rng.bounded(4));
      for (int k = 0; k < n; ++k)
        attempts.push_back(make_attempt(id, group, p, ++ts,
                                        100.0 * static_cast<double>(rng.bounded(8)) / 7.0, kProof));
    }
    for (int q = 1; q <= 10; ++q) {
      char qid[4];
      std::snprintf(qid, sizeof qid, "S%02d", q);
      survey.push_back({id, group, qid, static_cast<int>(rng.bounded(5)) - 2, false});
    }
  }
  attempts.push_back(make_attempt("lazy", Strategy::FirstIncorrect, "P1", ++ts, 0.0, "hello"));
  const auto t = build_study_tables(attempts, survey);
  EXPECT_EQ(t.scores_csv.substr(0, t.scores_csv.find('\n')),
            "problem,score,selfeval_n,selfeval_mean,selfeval_sd,random_n,random_mean,random_sd,"
            "first_n,first_mean,first_sd,H,p,degenerate");
  EXPECT_NE(t.scores_csv.find("P3,best,"), std::string::npos);
  EXPECT_NE(t.regression_csv.find("beta2,"), std::string::npos);
  EXPECT_NE(t.regression_csv.find("R2,"), std::string::npos);
  EXPECT_NE(t.survey_anova_csv.find("S04,"), std::string::npos);
  EXPECT_NE(t.reliability_csv.find("S08-S10"), std::string::npos);
  EXPECT_NE(t.exclusions_csv.find("lazy,all_trivial"), std::string::npos) << t.exclusions_csv;
  EXPECT_FALSE(t.posthoc_csv.empty());
  EXPECT_FALSE(t.survey_pairs_csv.empty());
}
