#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dlab/autodiff/gradcheck.hpp"
#include "dlab/diffusion/schedule.hpp"
#include "dlab/teachers/mixture.hpp"

using namespace dlab;
using namespace dlab::teachers;

namespace {

// Direct (non log-sum-exp) summation in extended precision.
long double direct_density(const MixtureDensity& p, long double x) {
  long double acc = 0.0L;
  for (std::size_t k = 0; k < p.components(); ++k) {
    const long double s = p.stddev(k, 0), z = (x - p.mean(k, 0)) / s;
    acc += p.weights[k] * std::exp(-0.5L * z * z) / (s * std::sqrt(2.0L * std::numbers::pi_v<long double>));
  }
  return acc;
}

std::vector<double> grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

}  // namespace

TEST(Mixture, Validation) {
  EXPECT_THROW(mixture_1d({0.5, 0.4}, {0, 1}, {1, 1}), std::invalid_argument);
  EXPECT_THROW(mixture_1d({0.5, 0.5}, {0, 1}, {1, 0}), std::invalid_argument);
  EXPECT_THROW(mixture_1d({1.0}, {0, 1}, {1}), std::invalid_argument);
  EXPECT_NO_THROW(asymmetric_toy_target());
  EXPECT_NO_THROW(default_2d_target().validate());
}

TEST(Mixture, DensityIntegratesToOneOnToyGrid) {
  const auto p = asymmetric_toy_target();
  const auto g = grid(-7.0, 7.0, 4001);
  const double h = g[1] - g[0];
  double integral = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double w = (i == 0 || i + 1 == g.size()) ? 0.5 * h : h;
    integral += w * std::exp(gmm_logdensity(p, std::span<const double>(&g[i], 1)));
  }
  EXPECT_NEAR(integral, 1.0, 1e-4);
}

TEST(LogDensity, StandardNormalAtZero) {
  const auto p = mixture_1d({1.0}, {0.0}, {1.0});
  const std::vector<double> x{0.0};
  EXPECT_NEAR(gmm_logdensity(p, x), -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
}

TEST(LogDensity, ToyTargetMatchesExtendedPrecisionSum) {
  const auto p = asymmetric_toy_target();
  for (double x : {-1.2, -6.9, 0.0, 2.0, 6.9}) {
    const std::vector<double> xv{x};
    const double expected = static_cast<double>(std::log(direct_density(p, x)));
    EXPECT_NEAR(gmm_logdensity(p, xv), expected, 1e-13 * std::max(1.0, std::abs(expected)));
  }
  // Component 1 dominates at its own mean.
  const std::vector<double> at{-1.2};
  const double comp1 = std::log(0.75) - std::log(0.55) - 0.5 * std::log(2.0 * std::numbers::pi);
  EXPECT_NEAR(gmm_logdensity(p, at), comp1, 1e-3);
}

TEST(LogDensity, SymmetricMixtureIsEven) {
  const auto p = mixture_1d({0.5, 0.5}, {-1.3, 1.3}, {0.7, 0.7});
  for (double x : {0.1, 0.9, 2.5, 6.0}) {
    const std::vector<double> a{x}, b{-x};
    EXPECT_DOUBLE_EQ(gmm_logdensity(p, a), gmm_logdensity(p, b));
  }
}

TEST(Score, StandardNormal) {
  const auto p = mixture_1d({1.0}, {0.0}, {1.0});
  for (double x : {-2.0, 0.0, 0.5, 3.0}) {
    const std::vector<double> xv{x};
    EXPECT_DOUBLE_EQ(gmm_score(p, xv)[0], -x);
  }
}

TEST(Score, SymmetricMixtureVanishesAtOrigin) {
  const auto p = mixture_1d({0.5, 0.5}, {-2.0, 2.0}, {0.5, 0.5});
  const std::vector<double> x{0.0};
  EXPECT_EQ(gmm_score(p, x)[0], 0.0);
}

TEST(Score, MatchesFiniteDifferenceOnToyGrid) {
  const auto p = asymmetric_toy_target();
  for (double x : grid(-7.0, 7.0, 4001)) {
    const std::vector<double> xv{x};
    const auto fd = ad::finite_diff_grad([&](std::span<const double> pt) { return gmm_logdensity(p, pt); }, xv, 1e-5);
    const double s = gmm_score(p, xv)[0];
    EXPECT_LT(std::abs(s - fd[0]) / std::max(1.0, std::abs(fd[0])), 1e-6) << x;
  }
}

TEST(Score, TwoDimensionalMatchesFiniteDifference) {
  const auto p = default_2d_target();
  RngStream rng(4);
  for (int i = 0; i < 50; ++i) {
    const auto x = rng.normal_vector(2);
    const auto fd = ad::finite_diff_grad([&](std::span<const double> pt) { return gmm_logdensity(p, pt); }, x, 1e-5);
    EXPECT_LT(ad::max_relative_error(gmm_score(p, x), fd, 1.0), 1e-6);
  }
}

TEST(Marginal, ClosedFormExamples) {
  const auto p = mixture_1d({0.3, 0.7}, {2.0, -1.0}, {1.0, 0.5});
  const auto at_one = gmm_marginal(p, 1.0);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(at_one.mean(k, 0), 0.0);
    EXPECT_EQ(at_one.stddev(k, 0), 1.0);
  }
  const auto half = gmm_marginal(p, 0.5);
  EXPECT_DOUBLE_EQ(half.mean(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(half.stddev(0, 0) * half.stddev(0, 0), 0.5);
  const auto near = gmm_marginal(p, diffusion::kDefaultTMin);
  EXPECT_DOUBLE_EQ(near.mean(0, 0), 0.98 * 2.0);
  EXPECT_THROW(gmm_marginal(p, 0.0), std::invalid_argument);
}

// x_t2 = (alpha2/alpha1) x_t1 + sqrt(sigma2^2 - (alpha2/alpha1)^2 sigma1^2) eps'
TEST(Marginal, ChainedTimesMatchDirectMarginal) {
  const auto p = default_2d_target();
  for (auto [t1, t2] : {std::pair{0.1, 0.4}, std::pair{0.3, 0.9}, std::pair{0.5, 0.51}}) {
    const auto first = gmm_marginal(p, t1);
    const double ratio = diffusion::alpha(t2) / diffusion::alpha(t1);
    const double extra = t2 * t2 - ratio * ratio * t1 * t1;
    ASSERT_GT(extra, 0.0);
    const auto direct = gmm_marginal(p, t2);
    for (std::size_t i = 0; i < p.means.size(); ++i) {
      EXPECT_NEAR(ratio * first.means[i], direct.means[i], 1e-14);
      EXPECT_NEAR(ratio * ratio * first.stds[i] * first.stds[i] + extra, direct.stds[i] * direct.stds[i], 1e-14);
    }
  }
}

TEST(TeacherXpred, SingleGaussianPosteriorMean) {
  const auto p = mixture_1d({1.0}, {0.0}, {1.0});
  for (double t : {0.02, 0.3, 0.727, 0.98, 1.0}) {
    for (double xt : {-2.0, 0.4, 1.1}) {
      const std::vector<double> xv{xt};
      const double a = diffusion::alpha(t), s = diffusion::sigma(t);
      EXPECT_NEAR(teacher_xpred(p, xv, t)[0], a * xt / (a * a + s * s), 1e-15);
    }
  }
}

TEST(TeacherXpred, NoiselessLimit) {
  const auto p = asymmetric_toy_target();
  const std::vector<double> xv{0.7};
  EXPECT_NEAR(teacher_xpred(p, xv, diffusion::kDefaultTMin)[0], 0.7 / 0.98, 5e-3);
}

TEST(TeacherXpred, MatchesMonteCarloPosteriorMean) {
  const auto p = default_2d_target();
  RngStream rng(21);
  const auto draws = sample(p, 1'000'000, rng);
  for (double t : {0.4, 0.727, 0.96}) {
    const std::vector<double> xt{0.3, -0.2};
    const double a = diffusion::alpha(t), s = diffusion::sigma(t);
    double num0 = 0.0, num1 = 0.0, den = 0.0;
    for (std::size_t i = 0; i < draws.size(); i += 2) {
      const double r0 = (xt[0] - a * draws[i]) / s, r1 = (xt[1] - a * draws[i + 1]) / s;
      const double w = std::exp(-0.5 * (r0 * r0 + r1 * r1));
      num0 += w * draws[i];
      num1 += w * draws[i + 1];
      den += w;
    }
    const auto mu = teacher_xpred(p, xt, t);
    EXPECT_NEAR(mu[0], num0 / den, 1e-2);
    EXPECT_NEAR(mu[1], num1 / den, 1e-2);
  }
}

// The ideal-tracking premise: the analytic teacher's x-prediction and its score
// are the same object under the x-prediction/score conversion.
TEST(TeacherXpred, ScoreConsistency) {
  const auto p = default_2d_target();
  RngStream rng(22);
  for (double t : {0.1, 0.5, 0.727, 0.889, 0.96, 0.98}) {
    const auto xt = rng.normal_vector(40);
    const auto via_xpred = diffusion::score_from_xpred(teacher_xpred(p, xt, t), xt, t);
    const auto direct = gmm_score_batch(gmm_marginal(p, t), xt);
    for (std::size_t i = 0; i < xt.size(); ++i) {
      EXPECT_LT(std::abs(via_xpred[i] - direct[i]), 1e-12 * std::max(1.0, std::abs(direct[i]))) << "t=" << t;
    }
  }
}

// At t_min the score conversion scales roundoff by alpha / sigma^2 ~ 2450, so
// the two routes are compared on the x-prediction side instead.
TEST(TeacherXpred, ScoreConsistencyAtMinimumNoise) {
  const auto p = default_2d_target();
  RngStream rng(23);
  const double t = diffusion::kDefaultTMin;
  const auto xt = rng.normal_vector(40);
  const auto via_score = diffusion::xpred_from_score(gmm_score_batch(gmm_marginal(p, t), xt), xt, t);
  const auto direct = teacher_xpred(p, xt, t);
  for (std::size_t i = 0; i < xt.size(); ++i) EXPECT_LT(std::abs(via_score[i] - direct[i]), 1e-12);
}

TEST(Guidance, CfgCombine) {
  const std::vector<double> cond{1.0, 2.0}, uncond{0.0, 2.0};
  EXPECT_EQ(cfg_combine(cond, uncond, 0.0), cond);
  EXPECT_EQ(cfg_combine(cond, cond, 7.5), cond);
  EXPECT_EQ(cfg_combine(cond, uncond, 2.0)[0], 3.0);
  EXPECT_THROW(cfg_combine(cond, uncond, -1.0), std::invalid_argument);
}

TEST(Guidance, TeacherUsesConditionalSubset) {
  const auto p = default_2d_target();
  const std::vector<std::size_t> first{0};
  const auto cond = select_components(p, first);
  EXPECT_EQ(cond.components(), 1u);
  EXPECT_DOUBLE_EQ(cond.weights[0], 1.0);
  AnalyticTeacher unguided(p);
  AnalyticTeacher guided(p, {.cfg_scale = 1.5, .conditional = cond});
  const std::vector<double> xt{0.1, 0.2};
  const double t = 0.8;
  EXPECT_EQ(unguided.xpred(xt, t), teacher_xpred(p, xt, t));
  EXPECT_EQ(guided.xpred(xt, t), cfg_combine(teacher_xpred(cond, xt, t), teacher_xpred(p, xt, t), 1.5));
  EXPECT_EQ(&guided.target(), &guided.target());
  EXPECT_EQ(guided.target().components(), 1u);
}

TEST(Sampling, MomentsOfDraws) {
  const auto p = asymmetric_toy_target();
  RngStream rng(5);
  const auto x = sample(p, 200000, rng);
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  EXPECT_NEAR(m, 0.75 * -1.2 + 0.25 * 2.0, 0.01);
}
