#include "dlab/analysis/gradient_suite.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dlab/autodiff/gradcheck.hpp"
#include "dlab/diffusion/schedule.hpp"
#include "dlab/objectives/losses.hpp"
#include "dlab/rng.hpp"

namespace dlab::analysis {
namespace {

using Vec = std::vector<double>;

constexpr std::size_t kBatch = 3, kDim = 2;
constexpr double kLambda = 0.1, kSidAlpha = 0.3;
const char* const kLosses[] = {"fisher", "regression", "nr", "rc", "sim", "sid", "sgmd_outer", "sgmd_inner"};

struct Base {
  Vec x0, eps, xt, x_real;
  double t;
};

Vec to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

Vec predict(const diffusion::XPredictor& net, std::span<const double> xt, double t) {
  return to_vec(net.predict(ad::Value::constant(to_vec(xt), {kBatch, kDim}), t).data());
}

double sqdist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

double inner(const Vec& a, const Vec& b, std::span<const double> c, const Vec& d) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (c[i] - d[i]);
  return s;
}

// Plain-double value of each loss; x0 and net vary, sg quantities come from base.
double closed_form(const std::string& which, const Base& base, std::span<const double> x0,
                   const diffusion::XPredictor& net) {
  const double c = diffusion::c_weight(base.t), inv_b = 1.0 / kBatch;
  const Vec xf_live = predict(net, diffusion::forward_noise(x0, base.t, base.eps), base.t);
  const Vec xf_sg_in = predict(net, base.xt, base.t);
  const double fisher = 0.5 * c * inv_b * sqdist(xf_live, base.x_real);
  const double half_r2 = 0.5 * inv_b * sqdist(base.x0, xf_live);
  const double l2 = c * inv_b * inner(xf_sg_in, base.x_real, x0, xf_sg_in);
  if (which == "fisher") return fisher;
  if (which == "regression") return inv_b * sqdist(xf_sg_in, base.x0);
  if (which == "nr") return -half_r2;
  if (which == "rc") return half_r2;
  if (which == "sim") return fisher + l2;
  if (which == "sid") return fisher + kSidAlpha * l2;
  if (which == "sgmd_outer") return fisher - kLambda * half_r2;
  if (which == "sgmd_inner") return kLambda * half_r2;
  throw std::logic_error("unknown loss " + which);
}

ad::Value build(const std::string& which, const objectives::ScorePair& pair) {
  using namespace objectives;
  if (which == "fisher") return fisher_loss(pair);
  if (which == "regression") return fake_regression_loss(pair);
  if (which == "nr") return nr_loss(pair);
  if (which == "rc") return rc_loss(pair);
  if (which == "sim") return sim_loss(pair);
  if (which == "sid") return sid_loss(pair, kSidAlpha);
  if (which == "sgmd_outer") return sgmd_outer_loss(pair, kLambda);
  if (which == "sgmd_inner") return sgmd_inner_loss(pair, kLambda);
  throw std::logic_error("unknown loss " + which);
}

GradientCheck check_loss(const std::string& which, RngStream rng, std::size_t points,
                         const teachers::AnalyticTeacher& teacher) {
  GradientCheck out;
  out.loss = which;
  out.points = points;
  out.tolerance = kGradientTolerance;
  const auto& ladder = diffusion::default_train_timesteps();
  for (std::size_t trial = 0; trial < points; ++trial) {
    diffusion::MlpPredictor fake(kDim, {6}, rng);
    Base base;
    base.t = trial % 2 ? rng.uniform(0.1, 0.95) : ladder[rng.index(ladder.size())];
    base.x0 = rng.normal_vector(kBatch * kDim);
    base.eps = rng.normal_vector(kBatch * kDim);
    base.xt = diffusion::forward_noise(base.x0, base.t, base.eps);
    base.x_real = teacher.xpred(base.xt, base.t);

    auto x0 = ad::Value::variable(base.x0, {kBatch, kDim});
    auto pair = objectives::make_pair(x0, base.t, base.eps, fake, teacher);
    auto params = fake.parameters();
    params.push_back(x0);
    ad::backward(build(which, pair), params);

    const auto fd_x0 =
        ad::finite_diff_grad([&](std::span<const double> x) { return closed_form(which, base, x, fake); }, base.x0);
    out.max_error_x0 = std::max(out.max_error_x0, ad::max_relative_error(to_vec(x0.grad()), fd_x0, 1e-8));

    Vec flat, grad;
    for (std::size_t p = 0; p + 1 < params.size(); ++p) {
      flat.insert(flat.end(), params[p].data().begin(), params[p].data().end());
      grad.insert(grad.end(), params[p].grad().begin(), params[p].grad().end());
    }
    auto probe = fake.clone();
    const auto fd_psi = ad::finite_diff_grad(
        [&](std::span<const double> theta) {
          std::size_t off = 0;
          for (auto& p : probe->parameters()) {
            auto dst = p.mutable_data();
            for (auto& v : dst) v = theta[off++];
          }
          return closed_form(which, base, base.x0, *probe);
        },
        flat);
    out.max_error_psi = std::max(out.max_error_psi, ad::max_relative_error(grad, fd_psi, 1e-8));
  }
  out.pass = out.max_error_x0 < out.tolerance && out.max_error_psi < out.tolerance;
  return out;
}

}  // namespace

GradientSuiteReport gradient_oracle_suite(std::uint64_t seed, std::size_t points) {
  if (points == 0) throw std::invalid_argument("gradient_oracle_suite: points must be positive");
  const RngStream root(seed);
  const teachers::AnalyticTeacher teacher(teachers::default_2d_target());
  GradientSuiteReport report;
  for (std::size_t i = 0; i < std::size(kLosses); ++i) {
    report.losses.push_back(check_loss(kLosses[i], root.split(i), points, teacher));
  }

  RngStream rng = root.split(100);
  NrRouteCheck linear{"matrix", 0.0, 1e-8, false}, mlp{"mlp", 0.0, 1e-3, false};
  for (std::size_t trial = 0; trial < points; ++trial) {
    const double t = rng.uniform(0.1, 0.95);
    const auto x0 = rng.normal_vector(8), eps = rng.normal_vector(8);
    diffusion::MatrixPredictor matrix(rng.normal_vector(4), 2);
    linear.max_error = std::max(linear.max_error, objectives::nr_effective_grad_check(x0, 2, t, eps, matrix).max_relative_error);
    diffusion::MlpPredictor net(2, {16, 16}, rng);
    mlp.max_error = std::max(mlp.max_error, objectives::nr_effective_grad_check(x0, 2, t, eps, net).max_relative_error);
  }
  linear.pass = linear.max_error < linear.tolerance;
  mlp.pass = mlp.max_error < mlp.tolerance;
  report.nr_routes = {linear, mlp};
  report.all_pass = std::all_of(report.losses.begin(), report.losses.end(), [](const auto& c) { return c.pass; }) &&
                    linear.pass && mlp.pass;
  return report;
}

}  // namespace dlab::analysis
