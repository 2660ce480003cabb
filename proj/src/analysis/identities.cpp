#include "dlab/analysis/identities.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "dlab/autodiff/ops.hpp"
#include "dlab/diffusion/schedule.hpp"
#include "dlab/objectives/losses.hpp"
#include "dlab/rng.hpp"

namespace dlab::analysis {
namespace {

using Vec = std::vector<double>;

struct Tuple {
  Vec x_fake, x_real, x0, b;
  Vec M;  // row-major dim x dim
  double t = 0.0;
  double c = 0.0;
};

std::string describe(const Tuple& u) {
  return fmt::format("t={} c={} x_fake=[{}] x_real=[{}] x0=[{}] M=[{}] b=[{}]", u.t, u.c, fmt::join(u.x_fake, ","),
                     fmt::join(u.x_real, ","), fmt::join(u.x0, ","), fmt::join(u.M, ","), fmt::join(u.b, ","));
}

double scaled_error(std::span<const double> a, std::span<const double> ref) {
  double diff = 0.0, scale = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - ref[i]));
    scale = std::max(scale, std::abs(ref[i]));
  }
  return diff / scale;
}

Vec normals(RngStream& rng, std::size_t n) {
  Vec v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

// M^T v for row-major M
Vec transpose_apply(const Vec& M, const Vec& v) {
  const std::size_t d = v.size();
  Vec out(d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += M[i * d + j] * v[i];
  return out;
}

Vec transpose_matrix(const Vec& M, std::size_t d) {
  Vec out(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j * d + i] = M[i * d + j];
  return out;
}

// L1 + alpha L2 through objectives, gradient on x_fake. With `coupled`, x0 = M x_fake + b.
struct LossEval {
  double value;
  Vec grad;
};

LossEval objective_grad(const Tuple& u, double alpha, bool coupled, bool via_sim) {
  const std::size_t d = u.x_fake.size();
  auto xf = ad::Value::variable(u.x_fake, {1, d});
  auto xr = ad::Value::constant(u.x_real, {1, d});
  ad::Value x0 = coupled ? ad::add(ad::matmul(xf, ad::Value::constant(transpose_matrix(u.M, d), {d, d})),
                                   ad::Value::constant(u.b, {1, d}))
                         : ad::Value::constant(u.x0, {1, d});
  auto pair = objectives::make_pair_from_predictions(x0, xf, xr, u.t);
  auto loss = via_sim ? objectives::sim_loss(pair) : objectives::sid_loss(pair, alpha);
  ad::backward(loss);
  return {loss.item(), Vec(xf.grad().begin(), xf.grad().end())};
}

// Expanded x-prediction form; differentiated separately on its own tape.
LossEval rewrite_grad(const Tuple& u, double alpha) {
  const std::size_t d = u.x_fake.size();
  auto xf = ad::Value::variable(u.x_fake, {1, d});
  auto xr = ad::Value::constant(u.x_real, {1, d});
  auto x0 = ad::Value::constant(u.x0, {1, d});
  auto body = ad::add(ad::add(ad::scale(ad::squared_norm(xr), 0.5), ad::scale(ad::squared_norm(xf), 0.5 - alpha)),
                      ad::scale(ad::dot(xf, xr), alpha - 1.0));
  body = ad::add(body, ad::scale(ad::sub(ad::dot(x0, xf), ad::dot(x0, xr)), alpha));
  auto loss = ad::scale(body, u.c);
  ad::backward(loss);
  return {loss.item(), Vec(xf.grad().begin(), xf.grad().end())};
}

// c (alpha (x0 - xf) + (1 - alpha)(xf - xr) + alpha M^T (xf - xr)); M omitted when uncoupled.
Vec closed_form(const Tuple& u, double alpha, bool coupled) {
  const std::size_t d = u.x_fake.size();
  Vec x0 = u.x0, gap(d);
  for (std::size_t i = 0; i < d; ++i) gap[i] = u.x_fake[i] - u.x_real[i];
  Vec coupling(d, 0.0);
  if (coupled) {
    for (std::size_t i = 0; i < d; ++i) {
      x0[i] = u.b[i];
      for (std::size_t j = 0; j < d; ++j) x0[i] += u.M[i * d + j] * u.x_fake[j];
    }
    coupling = transpose_apply(u.M, gap);
  }
  Vec g(d);
  for (std::size_t i = 0; i < d; ++i) {
    g[i] = u.c * (alpha * (x0[i] - u.x_fake[i]) + (1.0 - alpha) * gap[i] + alpha * coupling[i]);
  }
  return g;
}

class CheckBuilder {
 public:
  CheckBuilder(std::string name, double tolerance) { check_.name = std::move(name), check_.tolerance = tolerance; }
  void record(double err, const Tuple& u) {
    if (!(err <= check_.max_error)) {
      check_.max_error = err;  // NaN sticks
      if (!(err <= check_.tolerance)) check_.worst_tuple = describe(u);
    }
  }
  IdentityCheck finish() {
    check_.pass = check_.max_error <= check_.tolerance;
    return check_;
  }

 private:
  IdentityCheck check_;
};

}  // namespace

IdentityReport identity_suite(const IdentityOptions& options) {
  if (options.tuples == 0 || options.dim == 0) throw std::invalid_argument("identity_suite: need tuples and dim");
  const std::size_t d = options.dim;
  const RngStream root(options.seed);
  std::vector<Tuple> tuples;
  for (std::size_t k = 0; k < options.tuples; ++k) {
    RngStream rng = root.split(k);
    Tuple u;
    u.x_fake = normals(rng, d);
    u.x_real = normals(rng, d);
    u.x0 = normals(rng, d);
    u.b = normals(rng, d);
    u.M = normals(rng, d * d);
    u.t = rng.uniform(0.1, 0.98);
    u.c = diffusion::c_weight(u.t);
    tuples.push_back(std::move(u));
  }

  IdentityReport report;
  constexpr double kRewriteTol = 1e-10, kDecompTol = 1e-9;

  {
    CheckBuilder value("sim_rewrite_value", kRewriteTol), grad("sim_rewrite_grad", kRewriteTol);
    for (const auto& u : tuples) {
      const auto lhs = objective_grad(u, 1.0, false, true);
      const auto rw = rewrite_grad(u, 1.0);
      const auto cf = closed_form(u, 1.0, false);
      value.record(std::abs(lhs.value - rw.value) / std::max(1.0, std::abs(rw.value)), u);
      grad.record(std::max(scaled_error(lhs.grad, rw.grad), scaled_error(lhs.grad, cf)), u);
    }
    report.checks.push_back(value.finish());
    report.checks.push_back(grad.finish());
  }
  for (double alpha : options.alphas) {
    CheckBuilder value(fmt::format("sid_rewrite_value_alpha_{}", alpha), kRewriteTol);
    CheckBuilder grad(fmt::format("sid_rewrite_grad_alpha_{}", alpha), kRewriteTol);
    for (const auto& u : tuples) {
      const auto lhs = objective_grad(u, alpha, false, false);
      const auto rw = rewrite_grad(u, alpha);
      value.record(std::abs(lhs.value - rw.value) / std::max(1.0, std::abs(rw.value)), u);
      grad.record(std::max(scaled_error(lhs.grad, rw.grad), scaled_error(lhs.grad, closed_form(u, alpha, false))), u);
    }
    report.checks.push_back(value.finish());
    report.checks.push_back(grad.finish());
  }
  {
    CheckBuilder same("sid_alpha_1_bitwise_sim", 0.0);
    for (const auto& u : tuples) {
      for (bool coupled : {false, true}) {
        const auto sim = objective_grad(u, 1.0, coupled, true);
        const auto sid = objective_grad(u, 1.0, coupled, false);
        const bool equal = std::memcmp(&sim.value, &sid.value, sizeof(double)) == 0 &&
                           std::memcmp(sim.grad.data(), sid.grad.data(), sizeof(double) * d) == 0;
        same.record(equal ? 0.0 : 1.0, u);
      }
    }
    report.checks.push_back(same.finish());
  }
  {
    CheckBuilder sim("sim_decomposition_coupled", kDecompTol);
    for (const auto& u : tuples) sim.record(scaled_error(objective_grad(u, 1.0, true, true).grad, closed_form(u, 1.0, true)), u);
    report.checks.push_back(sim.finish());
  }
  for (double alpha : options.alphas) {
    CheckBuilder sid(fmt::format("sid_decomposition_coupled_alpha_{}", alpha), kDecompTol);
    for (const auto& u : tuples) {
      sid.record(scaled_error(objective_grad(u, alpha, true, false).grad, closed_form(u, alpha, true)), u);
    }
    report.checks.push_back(sid.finish());
  }
  {
    // no coupling: only the tracking term c (x0 - x_fake) remains
    CheckBuilder zero("sim_decomposition_zero_map", kDecompTol);
    for (auto u : tuples) {
      std::fill(u.M.begin(), u.M.end(), 0.0);
      u.b = u.x0;
      Vec expect(d);
      for (std::size_t i = 0; i < d; ++i) expect[i] = u.c * (u.x0[i] - u.x_fake[i]);
      zero.record(scaled_error(objective_grad(u, 1.0, true, true).grad, expect), u);
    }
    report.checks.push_back(zero.finish());
  }
  report.all_pass = std::all_of(report.checks.begin(), report.checks.end(), [](const auto& c) { return c.pass; });
  return report;
}

}  // namespace dlab::analysis
