#include "glsmul/objectives.hpp"

#include "glsmul/embedding.hpp"
#include "oracles.hpp"

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace glsmul {
namespace {

using ::testing::HasSubstr;

DiscrepancyConfig config(int c, KernelSpec kz = KernelSpec::gaussian(1.2)) {
  DiscrepancyConfig cfg;
  cfg.num_classes = c;
  cfg.feature_kernel = kz;
  cfg.label_kernel = KernelSpec::gaussian(1.0);
  cfg.epsilon = 1e-2;
  return cfg;
}

struct Problem {
  Matrix zs;
  std::vector<int> ys;
  Matrix zt;
  std::vector<int> yt;  // pseudo-labels, -1 for excluded rows
};

// Class k around (k, 0); target shifted by `shift`, with every `skip`-th
// target row left unlabeled.
Problem make_problem(Index ns, Index nt, int c, std::uint64_t seed, double shift = 0.5,
                     int skip = 4) {
  Problem p;
  p.ys = oracle::random_labels(ns, c, seed);
  p.zs = oracle::random_normal(ns, 2, seed + 1, 0.6);
  for (Index i = 0; i < ns; ++i) p.zs(i, 0) += p.ys[static_cast<std::size_t>(i)];
  p.yt = oracle::random_labels(nt, c, seed + 2);
  p.zt = oracle::random_normal(nt, 2, seed + 3, 0.6);
  for (Index i = 0; i < nt; ++i) p.zt(i, 0) += p.yt[static_cast<std::size_t>(i)] + shift;
  for (Index i = c; i < nt; i += skip) p.yt[static_cast<std::size_t>(i)] = kUnlabeled;
  return p;
}

oracle::Domain selected_target(const Problem& p) {
  oracle::Domain d;
  std::vector<Index> rows;
  for (std::size_t i = 0; i < p.yt.size(); ++i) {
    if (p.yt[i] != kUnlabeled) {
      rows.push_back(static_cast<Index>(i));
      d.y.push_back(p.yt[i]);
    }
  }
  d.z.resize(static_cast<Index>(rows.size()), p.zt.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) d.z.row(static_cast<Index>(r)) = p.zt.row(rows[r]);
  return d;
}

double oracle_mcmd(const oracle::Domain& a, const oracle::Domain& b, int c, int yi, int yj,
                   const DiscrepancyConfig& cfg) {
  return oracle::mcmd_squared(a, b, c, yi, yj, oracle::Family::gaussian,
                              cfg.feature_kernel.bandwidth, oracle::Family::gaussian,
                              cfg.label_kernel.bandwidth, cfg.epsilon);
}

double oracle_du(const Problem& p, int c, const DiscrepancyConfig& cfg) {
  oracle::Domain all{p.zs, p.ys};
  const oracle::Domain t = selected_target(p);
  all.z.conservativeResize(p.zs.rows() + t.z.rows(), Eigen::NoChange);
  all.z.bottomRows(t.z.rows()) = t.z;
  all.y.insert(all.y.end(), t.y.begin(), t.y.end());
  double v = 0.0;
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < c; ++j)
      if (i != j) v += oracle_mcmd(all, all, c, i, j, cfg);
  return v;
}

// ---------------------------------------------------------------- loss_du

TEST(LossDu, CoincidentClassesGiveZeroValueAndGradient) {
  Matrix zs(4, 1);
  zs << 0.3, 0.3, 0.3, 0.3;
  const std::vector<int> ys = {0, 1, 0, 1};
  const Matrix zt(0, 1);
  const std::vector<int> none;
  const LossBundle b = loss_du(zs, ys, zt, none, config(2));
  EXPECT_NEAR(b.value, 0.0, 1e-12);
  EXPECT_LT(b.grad_source.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LossDu, FourPointsMatchOracleAndFiniteDifferences) {
  Matrix zs(4, 1);
  zs << -1.0, -0.4, 0.5, 1.2;
  const std::vector<int> ys = {0, 0, 1, 1};
  const Matrix zt(0, 1);
  const std::vector<int> none;
  const DiscrepancyConfig cfg = config(2);
  const LossBundle b = loss_du(zs, ys, zt, none, cfg);
  const double ref = 2.0 * oracle_mcmd({zs, ys}, {zs, ys}, 2, 0, 1, cfg);
  EXPECT_NEAR(b.value, ref, 1e-10);
  const Matrix fd = oracle::finite_difference(
      [&](const Matrix& x) { return loss_du(x, ys, zt, none, cfg).value; }, zs);
  EXPECT_LT(oracle::relative_error(b.grad_source, fd), 1e-4);
}

TEST(LossDu, GrowsWhenClassesSeparate) {
  Problem p = make_problem(45, 0, 3, 5);
  const DiscrepancyConfig cfg = config(3);
  const std::vector<int> none;
  const LossBundle near = loss_du(p.zs, p.ys, p.zt, none, cfg);
  for (Index i = 0; i < p.zs.rows(); ++i) p.zs(i, 0) += p.ys[static_cast<std::size_t>(i)];
  const LossBundle far = loss_du(p.zs, p.ys, p.zt, none, cfg);
  EXPECT_GT(near.value, 0.0);
  EXPECT_GT(far.value, near.value);
}

TEST(LossDu, PseudoLabeledTargetRowsMatchOracle) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Problem p = make_problem(30, 20, 3, seed);
    const DiscrepancyConfig cfg = config(3);
    EXPECT_NEAR(loss_du(p.zs, p.ys, p.zt, p.yt, cfg).value, oracle_du(p, 3, cfg), 1e-9);
  }
}

TEST(LossDu, GradientsMatchFiniteDifferencesOverSeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int c = 2 + static_cast<int>(seed % 3);
    const Problem p = make_problem(14, 10, c, seed);
    const DiscrepancyConfig cfg =
        config(c, seed % 2 ? KernelSpec::gaussian(0.9) : KernelSpec::laplacian(1.5));
    const LossBundle b = loss_du(p.zs, p.ys, p.zt, p.yt, cfg);
    const Matrix fd_s = oracle::finite_difference(
        [&](const Matrix& x) { return loss_du(x, p.ys, p.zt, p.yt, cfg).value; }, p.zs);
    const Matrix fd_t = oracle::finite_difference(
        [&](const Matrix& x) { return loss_du(p.zs, p.ys, x, p.yt, cfg).value; }, p.zt);
    EXPECT_LT(oracle::relative_error(b.grad_source, fd_s), 1e-4) << "seed " << seed;
    EXPECT_LT(oracle::relative_error(b.grad_target, fd_t), 1e-4) << "seed " << seed;
    // Unlabeled target rows carry no gradient.
    for (std::size_t i = 0; i < p.yt.size(); ++i) {
      if (p.yt[i] == kUnlabeled) EXPECT_EQ(b.grad_target.row(static_cast<Index>(i)).norm(), 0.0);
    }
  }
}

TEST(LossDu, PermutationInvariant) {
  const Problem p = make_problem(40, 20, 3, 8);
  const DiscrepancyConfig cfg = config(3);
  std::vector<Index> perm(40);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
  Matrix zs(40, 2);
  std::vector<int> ys(40);
  for (Index i = 0; i < 40; ++i) {
    zs.row(i) = p.zs.row(perm[static_cast<std::size_t>(i)]);
    ys[static_cast<std::size_t>(i)] = p.ys[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  }
  EXPECT_NEAR(loss_du(zs, ys, p.zt, p.yt, cfg).value, loss_du(p.zs, p.ys, p.zt, p.yt, cfg).value,
              1e-10);
}

TEST(LossDu, SingleClassIsDegenerate) {
  const Matrix zs = oracle::random_normal(5, 2, 1);
  const std::vector<int> ys(5, 1);
  const std::vector<int> none;
  try {
    loss_du(zs, ys, Matrix(0, 2), none, config(3));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_THAT(e.what(), HasSubstr("degenerate DU"));
  }
}

// ---------------------------------------------------------------- loss_tu

TEST(LossTu, IdenticalDomainsGiveZero) {
  const Problem p = make_problem(30, 0, 3, 2);
  const Vector prior = Vector::Constant(3, 1.0 / 3.0);
  const LossBundle b = loss_tu(p.zs, p.ys, p.zs, p.ys, prior, config(3));
  EXPECT_NEAR(b.value, 0.0, 1e-10);
  EXPECT_TRUE(b.skipped_classes.empty());
}

TEST(LossTu, OneHotPriorIsolatesOneClass) {
  const Problem p = make_problem(40, 40, 3, 3, 1.0);
  const DiscrepancyConfig cfg = config(3);
  Vector prior = Vector::Zero(3);
  prior(1) = 1.0;
  const LossBundle b = loss_tu(p.zs, p.ys, p.zt, p.yt, prior, cfg);
  EXPECT_NEAR(b.value, oracle_mcmd({p.zs, p.ys}, selected_target(p), 3, 1, 1, cfg), 1e-9);
}

TEST(LossTu, MaskedClassDropsOutOfTheWeightedSum) {
  const Problem p = make_problem(40, 40, 3, 4, 0.8);
  const DiscrepancyConfig cfg = config(3);
  Vector prior(3);
  prior << 0.7, 0.0, 0.3;
  const LossBundle b = loss_tu(p.zs, p.ys, p.zt, p.yt, prior, cfg);
  const oracle::Domain s{p.zs, p.ys};
  const oracle::Domain t = selected_target(p);
  const double ref = 0.7 * oracle_mcmd(s, t, 3, 0, 0, cfg) + 0.3 * oracle_mcmd(s, t, 3, 2, 2, cfg);
  EXPECT_NEAR(b.value, ref, 1e-10);
}

TEST(LossTu, SixtyPerDomainMatchesOracleAndFiniteDifferences) {
  // Two classes; target class 1 shifted by (1, 0).
  const std::vector<int> ys = oracle::random_labels(60, 2, 31);
  const std::vector<int> yt = oracle::random_labels(60, 2, 32);
  Matrix zs = oracle::random_normal(60, 2, 33, 0.5);
  Matrix zt = oracle::random_normal(60, 2, 34, 0.5);
  for (Index i = 0; i < 60; ++i) {
    zs(i, 1) += 2.0 * ys[static_cast<std::size_t>(i)];
    zt(i, 1) += 2.0 * yt[static_cast<std::size_t>(i)];
    if (yt[static_cast<std::size_t>(i)] == 1) zt(i, 0) += 1.0;
  }
  const DiscrepancyConfig cfg = config(2);
  Vector prior(2);
  prior << 0.4, 0.6;
  const LossBundle b = loss_tu(zs, ys, zt, yt, prior, cfg);
  const double ref = 0.4 * oracle_mcmd({zs, ys}, {zt, yt}, 2, 0, 0, cfg) +
                     0.6 * oracle_mcmd({zs, ys}, {zt, yt}, 2, 1, 1, cfg);
  EXPECT_NEAR(b.value, ref, 1e-9);
  const Matrix fd_s = oracle::finite_difference(
      [&](const Matrix& x) { return loss_tu(x, ys, zt, yt, prior, cfg).value; }, zs);
  const Matrix fd_t = oracle::finite_difference(
      [&](const Matrix& x) { return loss_tu(zs, ys, x, yt, prior, cfg).value; }, zt);
  EXPECT_LT(oracle::relative_error(b.grad_source, fd_s), 1e-4);
  EXPECT_LT(oracle::relative_error(b.grad_target, fd_t), 1e-4);
}

TEST(LossTu, GradientsMatchFiniteDifferencesOverSeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int c = 2 + static_cast<int>(seed % 3);
    const Problem p = make_problem(12, 12, c, seed + 100, 0.7);
    const DiscrepancyConfig cfg =
        config(c, seed % 2 ? KernelSpec::gaussian(0.8) : KernelSpec::laplacian(1.1));
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    Vector prior(c);
    for (int k = 0; k < c; ++k) prior(k) = u(gen);
    prior /= prior.sum();
    const LossBundle b = loss_tu(p.zs, p.ys, p.zt, p.yt, prior, cfg);
    EXPECT_GE(b.value, 0.0);
    const Matrix fd_s = oracle::finite_difference(
        [&](const Matrix& x) { return loss_tu(x, p.ys, p.zt, p.yt, prior, cfg).value; }, p.zs);
    const Matrix fd_t = oracle::finite_difference(
        [&](const Matrix& x) { return loss_tu(p.zs, p.ys, x, p.yt, prior, cfg).value; }, p.zt);
    EXPECT_LT(oracle::relative_error(b.grad_source, fd_s), 1e-4) << "seed " << seed;
    EXPECT_LT(oracle::relative_error(b.grad_target, fd_t), 1e-4) << "seed " << seed;
  }
}

TEST(LossTu, PermutationInvariant) {
  const Problem p = make_problem(30, 30, 3, 9);
  const DiscrepancyConfig cfg = config(3);
  const Vector prior = Vector::Constant(3, 1.0 / 3.0);
  Matrix zt = p.zt.colwise().reverse();
  std::vector<int> yt(p.yt.rbegin(), p.yt.rend());
  EXPECT_NEAR(loss_tu(p.zs, p.ys, zt, yt, prior, cfg).value,
              loss_tu(p.zs, p.ys, p.zt, p.yt, prior, cfg).value, 1e-10);
}

TEST(LossTu, SkipsAndRejects) {
  Problem p = make_problem(20, 20, 3, 10);
  for (int& y : p.yt) {
    if (y == 2) y = kUnlabeled;
  }
  const Vector prior = Vector::Constant(3, 1.0 / 3.0);
  const LossBundle b = loss_tu(p.zs, p.ys, p.zt, p.yt, prior, config(3));
  EXPECT_EQ(b.skipped_classes, std::vector<int>{2});

  Vector bad(3);
  bad << 0.5, 0.5, 0.5;
  try {
    loss_tu(p.zs, p.ys, p.zt, p.yt, bad, config(3));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_THAT(e.what(), HasSubstr("not a simplex vector"));
  }
  std::vector<int> none(p.yt.size(), kUnlabeled);
  try {
    loss_tu(p.zs, p.ys, p.zt, none, prior, config(3));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_THAT(e.what(), HasSubstr("degenerate TU"));
  }
}

// ---------------------------------------------------------------- loss_e

double scalar_weighted_ce(const Matrix& logits, const std::vector<int>& y, const Vector& w) {
  double total = 0.0;
  for (Index i = 0; i < logits.rows(); ++i) {
    double z = 0.0;
    for (Index j = 0; j < logits.cols(); ++j) z += std::exp(logits(i, j));
    const double p = std::exp(logits(i, y[static_cast<std::size_t>(i)])) / z;
    total += -w(y[static_cast<std::size_t>(i)]) * std::log(p);
  }
  return total / static_cast<double>(logits.rows());
}

TEST(LossE, TwoSampleWorkedExample) {
  Matrix logits(2, 2);
  logits << 1.0, 0.0, 0.0, 1.0;
  const std::vector<int> y = {0, 1};
  ClassWeights w = ClassWeights::uniform(2);
  w.importance << 2.0, 1.0;
  const LossBundle b = loss_e(logits, y, w);
  EXPECT_NEAR(b.value, 1.5 * std::log1p(std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(b.value, scalar_weighted_ce(logits, y, w.importance), 1e-15);
}

TEST(LossE, UniformWeightsAndPerfectPredictions) {
  const Matrix logits = oracle::random_normal(10, 4, 3);
  const std::vector<int> y = oracle::random_labels(10, 4, 4);
  EXPECT_NEAR(loss_e(logits, y, ClassWeights::uniform(4)).value,
              scalar_weighted_ce(logits, y, Vector::Ones(4)), 1e-14);
  Matrix confident = Matrix::Zero(10, 4);
  for (Index i = 0; i < 10; ++i) confident(i, y[static_cast<std::size_t>(i)]) = 60.0;
  EXPECT_LT(loss_e(confident, y, ClassWeights::uniform(4)).value, 1e-20);
}

TEST(LossE, GradientMatchesFiniteDifferencesOverSeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix logits = oracle::random_normal(8, 3, seed, 2.0);
    const std::vector<int> y = oracle::random_labels(8, 3, seed + 1);
    ClassWeights w = ClassWeights::uniform(3);
    w.importance = oracle::random_normal(3, 1, seed + 2).cwiseAbs();
    const LossBundle b = loss_e(logits, y, w);
    const Matrix fd = oracle::finite_difference(
        [&](const Matrix& x) { return scalar_weighted_ce(x, y, w.importance); }, logits);
    EXPECT_LT(oracle::relative_error(*b.grad_logits, fd), 1e-4) << "seed " << seed;
  }
}

TEST(LossE, ShapeChecks) {
  const std::vector<int> y = {0, 1};
  EXPECT_THROW(loss_e(Matrix::Zero(3, 2), y, ClassWeights::uniform(2)), Error);
  EXPECT_THROW(loss_e(Matrix::Zero(2, 2), y, ClassWeights::uniform(3)), Error);
  const std::vector<int> bad = {0, 2};
  EXPECT_THROW(loss_e(Matrix::Zero(2, 2), bad, ClassWeights::uniform(2)), Error);
}

// Importance weighting gives an unbiased estimate of the target risk: mean
// weighted source loss agrees with mean unweighted loss on samples drawn at
// the target prior, within three standard errors.
TEST(LossE, ImportanceWeightingIsUnbiased) {
  const int c = 3;
  Vector ps(c), pt(c);
  ps << 0.5, 0.3, 0.2;
  pt << 0.1, 0.3, 0.6;
  ClassWeights w;
  w.importance = pt.cwiseQuotient(ps);
  w.target_prior = pt;
  const Matrix centers = oracle::random_normal(c, c, 5);  // fixed per-class logit means
  std::mt19937_64 gen(77);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto draw = [&](const Vector& prior, Index n, Matrix& logits, std::vector<int>& y) {
    std::discrete_distribution<int> cat(prior.data(), prior.data() + prior.size());
    logits.resize(n, c);
    y.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      y[static_cast<std::size_t>(i)] = cat(gen);
      for (int j = 0; j < c; ++j) logits(i, j) = centers(y[static_cast<std::size_t>(i)], j) + noise(gen);
    }
  };
  const int reps = 400;
  std::vector<double> weighted, target;
  for (int r = 0; r < reps; ++r) {
    Matrix l;
    std::vector<int> y;
    draw(ps, 200, l, y);
    weighted.push_back(loss_e(l, y, w).value);
    draw(pt, 200, l, y);
    target.push_back(loss_e(l, y, ClassWeights::uniform(c)).value);
  }
  auto mean_var = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::make_pair(m, s / static_cast<double>(v.size() - 1));
  };
  const auto [mw, vw] = mean_var(weighted);
  const auto [mt, vt] = mean_var(target);
  const double se = std::sqrt(vw / reps + vt / reps);
  EXPECT_LT(std::abs(mw - mt), 3.0 * se);
}

// ---------------------------------------------------------------- loss_mul

struct MulProblem {
  Problem p;
  Matrix logits;
  std::vector<int> du_labels;
  ClassWeights weights;
  DiscrepancyConfig cfg;
};

MulProblem make_mul(std::uint64_t seed) {
  MulProblem m;
  m.p = make_problem(12, 10, 3, seed + 500, 0.6, 3);
  m.logits = oracle::random_normal(12, 3, seed + 600);
  m.du_labels = m.p.yt;
  for (std::size_t i = 0; i < m.du_labels.size(); i += 2) m.du_labels[i] = kUnlabeled;
  m.weights.importance = oracle::random_normal(3, 1, seed + 700).cwiseAbs();
  m.weights.target_prior = m.weights.importance.cwiseAbs() + Vector::Constant(3, 0.1);
  m.weights.target_prior /= m.weights.target_prior.sum();
  m.cfg = config(3);
  return m;
}

TEST(LossMul, ZeroLambdasEqualCrossEntropy) {
  const MulProblem m = make_mul(1);
  const MulInputs in{m.p.zs, m.p.ys, m.logits, m.p.zt, m.p.yt, m.du_labels, m.weights, m.cfg};
  const MulLoss total = loss_mul(in, 0.0, 0.0);
  const LossBundle e = loss_e(m.logits, m.p.ys, m.weights);
  EXPECT_EQ(total.total.value, e.value);
  EXPECT_EQ(*total.total.grad_logits, *e.grad_logits);
  EXPECT_EQ(total.total.grad_source.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(total.total.grad_target.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LossMul, MatchedDomainsHaveNoTransferTerm) {
  const Problem p = make_problem(24, 0, 3, 3);
  const Matrix logits = oracle::random_normal(24, 3, 4);
  const ClassWeights w = ClassWeights::uniform(3);
  const std::vector<int> none(24, kUnlabeled);
  const DiscrepancyConfig cfg = config(3);
  const MulInputs in{p.zs, p.ys, logits, p.zs, p.ys, none, w, cfg};
  EXPECT_NEAR(loss_mul(in, 1.0, 0.0).j_tu, 0.0, 1e-10);
}

TEST(LossMul, TotalIsTheAffineCombination) {
  const MulProblem m = make_mul(2);
  const MulInputs in{m.p.zs, m.p.ys, m.logits, m.p.zt, m.p.yt, m.du_labels, m.weights, m.cfg};
  const double ltu = 0.7, ldu = 0.3;
  const MulLoss total = loss_mul(in, ltu, ldu);
  const LossBundle e = loss_e(m.logits, m.p.ys, m.weights);
  const LossBundle tu = loss_tu(m.p.zs, m.p.ys, m.p.zt, m.p.yt, m.weights.target_prior, m.cfg);
  const LossBundle du = loss_du(m.p.zs, m.p.ys, m.p.zt, m.du_labels, m.cfg);
  EXPECT_NEAR(total.total.value, e.value + ltu * tu.value - ldu * du.value, 1e-12);
  EXPECT_LT((total.total.grad_source - (ltu * tu.grad_source - ldu * du.grad_source)).cwiseAbs().maxCoeff(),
            1e-12);
  EXPECT_LT((total.total.grad_target - (ltu * tu.grad_target - ldu * du.grad_target)).cwiseAbs().maxCoeff(),
            1e-12);
  EXPECT_EQ(*total.total.grad_logits, *e.grad_logits);
}

TEST(LossMul, GradientsMatchFiniteDifferencesOverSeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MulProblem m = make_mul(seed);
    auto value = [&](const Matrix& zs, const Matrix& logits, const Matrix& zt) {
      const MulInputs in{zs, m.p.ys, logits, zt, m.p.yt, m.du_labels, m.weights, m.cfg};
      return loss_mul(in, 1.0, 0.1).total.value;
    };
    const MulInputs in{m.p.zs, m.p.ys, m.logits, m.p.zt, m.p.yt, m.du_labels, m.weights, m.cfg};
    const MulLoss total = loss_mul(in, 1.0, 0.1);
    const Matrix fd_s = oracle::finite_difference(
        [&](const Matrix& x) { return value(x, m.logits, m.p.zt); }, m.p.zs);
    const Matrix fd_l = oracle::finite_difference(
        [&](const Matrix& x) { return value(m.p.zs, x, m.p.zt); }, m.logits);
    const Matrix fd_t = oracle::finite_difference(
        [&](const Matrix& x) { return value(m.p.zs, m.logits, x); }, m.p.zt);
    EXPECT_LT(oracle::relative_error(total.total.grad_source, fd_s), 1e-4) << "seed " << seed;
    EXPECT_LT(oracle::relative_error(*total.total.grad_logits, fd_l), 1e-4) << "seed " << seed;
    EXPECT_LT(oracle::relative_error(total.total.grad_target, fd_t), 1e-4) << "seed " << seed;
  }
}

TEST(ClassWeights, Validation) {
  EXPECT_NO_THROW(ClassWeights::uniform(4).validate());
  ClassWeights w = ClassWeights::uniform(2);
  w.importance(0) = -0.1;
  EXPECT_THROW(w.validate(), Error);
  w = ClassWeights::uniform(2);
  w.target_prior(0) = 0.9;
  EXPECT_THROW(w.validate(), Error);
}

}  // namespace
}  // namespace glsmul
