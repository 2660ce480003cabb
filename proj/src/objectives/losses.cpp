#include "dlab/objectives/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "dlab/autodiff/gradcheck.hpp"
#include "dlab/autodiff/ops.hpp"
#include "dlab/diffusion/schedule.hpp"

namespace dlab::objectives {
namespace {

double inv_batch(const ScorePair& pair) { return 1.0 / static_cast<double>(pair.batch()); }

void require_positive_lambda(double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("SGMD: lambda must be positive");
}

}  // namespace

ScorePair make_pair(const ad::Value& x0, double t, std::span<const double> eps, const diffusion::XPredictor& fake,
                    const teachers::AnalyticTeacher& teacher, double t_min) {
  ScorePair pair;
  pair.x0 = x0;
  pair.eps.assign(eps.begin(), eps.end());
  pair.t = t;
  pair.c = diffusion::c_weight(t, t_min);
  pair.xt = diffusion::forward_noise(x0, t, eps, t_min);
  const auto xt_frozen = ad::stop_gradient(pair.xt);
  pair.x_fake = fake.predict(pair.xt, t);
  pair.x_fake_sg_in = fake.predict(xt_frozen, t);
  pair.x_real = ad::Value::constant(teacher.xpred(xt_frozen.data(), t), x0.shape());
  pair.delta = ad::sub(pair.x_fake, pair.x_real);
  pair.r = ad::sub(ad::stop_gradient(x0), pair.x_fake);
  return pair;
}

ScorePair make_pair_from_predictions(const ad::Value& x0, const ad::Value& x_fake, const ad::Value& x_real, double t,
                                     double t_min) {
  if (x0.shape() != x_fake.shape() || x0.shape() != x_real.shape()) {
    throw ad::ShapeError("make_pair_from_predictions", x0.shape(), x_fake.shape());
  }
  ScorePair pair;
  pair.x0 = x0;
  pair.t = t;
  pair.c = diffusion::c_weight(t, t_min);
  pair.x_fake = x_fake;
  pair.x_fake_sg_in = x_fake;
  pair.x_real = x_real;
  pair.delta = ad::sub(x_fake, x_real);
  pair.r = ad::sub(ad::stop_gradient(x0), x_fake);
  return pair;
}

void ObjectiveConfig::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("objective: lambda must be positive");
  if (fake_updates < 1) throw std::invalid_argument("objective: fake_updates (K) must be >= 1");
  if (!std::isfinite(sid_alpha)) throw std::invalid_argument("objective: sid_alpha must be finite");
}

ad::Value fisher_loss(const ScorePair& pair) {
  return ad::scale(ad::squared_norm(pair.delta), 0.5 * pair.c * inv_batch(pair));
}

ad::Value fake_regression_loss(const ScorePair& pair) {
  return ad::scale(ad::squared_norm(ad::sub(pair.x_fake_sg_in, ad::stop_gradient(pair.x0))), inv_batch(pair));
}

std::vector<double> dmd_generator_grad(const ScorePair& pair, bool normalize) {
  const auto xt = pair.xt.data();
  const auto s_fake = diffusion::score_from_xpred(pair.x_fake.data(), xt, pair.t);
  const auto s_real = diffusion::score_from_xpred(pair.x_real.data(), xt, pair.t);
  const std::size_t dim = pair.x0.cols();
  const double scale = inv_batch(pair);
  std::vector<double> seed(s_fake.size());
  for (std::size_t i = 0; i < seed.size(); i += dim) {
    double weight = 1.0;
    if (normalize) {
      double mean_abs = 0.0;
      for (std::size_t d = 0; d < dim; ++d) mean_abs += std::abs(pair.x_real.data()[i + d] - pair.x0.data()[i + d]);
      weight = 1.0 / (mean_abs / static_cast<double>(dim) + 1e-8);
    }
    for (std::size_t d = 0; d < dim; ++d) seed[i + d] = scale * weight * (s_fake[i + d] - s_real[i + d]);
  }
  return seed;
}

void inject_dmd_gradient(const ScorePair& pair, bool normalize, std::span<const ad::Value> targets) {
  ad::backward_seeded(pair.xt, dmd_generator_grad(pair, normalize), targets);
}

SimTerms sim_losses(const ScorePair& pair) {
  const double k = pair.c * inv_batch(pair);
  auto delta_sg_in = ad::sub(pair.x_fake_sg_in, pair.x_real);
  auto residual = ad::sub(pair.x0, pair.x_fake_sg_in);
  return {fisher_loss(pair), ad::scale(ad::dot(delta_sg_in, residual), k)};
}

ad::Value sim_loss(const ScorePair& pair) {
  auto terms = sim_losses(pair);
  return ad::add(terms.explicit_term, terms.implicit_term);
}

ad::Value sid_loss(const ScorePair& pair, double alpha) {
  auto terms = sim_losses(pair);
  return ad::add(terms.explicit_term, ad::scale(terms.implicit_term, alpha));
}

ad::Value nr_loss(const ScorePair& pair) { return ad::scale(ad::squared_norm(pair.r), -0.5 * inv_batch(pair)); }

ad::Value rc_loss(const ScorePair& pair) { return ad::scale(ad::squared_norm(pair.r), 0.5 * inv_batch(pair)); }

ad::Value sgmd_outer_loss(const ScorePair& pair, double lambda) {
  require_positive_lambda(lambda);
  return ad::add(fisher_loss(pair), ad::scale(nr_loss(pair), lambda));
}

ad::Value sgmd_inner_loss(const ScorePair& pair, double lambda) {
  require_positive_lambda(lambda);
  return ad::scale(rc_loss(pair), lambda);
}

NrGradientReport nr_effective_grad_check(std::span<const double> x0, std::size_t dim, double t,
                                         std::span<const double> eps, const diffusion::XPredictor& fake, double h) {
  if (dim == 0 || x0.size() % dim != 0 || eps.size() != x0.size()) {
    throw std::invalid_argument("nr_effective_grad_check: inconsistent shapes");
  }
  const std::size_t batch = x0.size() / dim;
  NrGradientReport report;

  // Route (a): reverse mode through x0 -> x_t -> x_fake, with sg[x0] in r.
  auto x0_leaf = ad::Value::variable({x0.begin(), x0.end()}, {batch, dim});
  auto xt = diffusion::forward_noise(x0_leaf, t, eps);
  auto x_fake = fake.predict(xt, t);
  auto r = ad::sub(ad::stop_gradient(x0_leaf), x_fake);
  auto loss = ad::scale(ad::squared_norm(r), -0.5 / static_cast<double>(batch));
  const std::vector<ad::Value> targets{x0_leaf};
  ad::backward(loss, targets);
  report.autodiff.assign(x0_leaf.grad().begin(), x0_leaf.grad().end());

  // Route (b): alpha J^T (x0 - x_fake) with J = d mu / d x_t from central differences.
  const std::vector<double> xt_data(xt.data().begin(), xt.data().end());
  const std::vector<double> fake_data(x_fake.data().begin(), x_fake.data().end());
  report.explicit_route.assign(x0.size(), 0.0);
  const double a = diffusion::alpha(t);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < dim; ++j) {
      auto bumped = xt_data;
      bumped[b * dim + j] = xt_data[b * dim + j] + h;
      auto up = fake.predict(ad::Value::constant(bumped, {batch, dim}), t);
      bumped[b * dim + j] = xt_data[b * dim + j] - h;
      auto down = fake.predict(ad::Value::constant(bumped, {batch, dim}), t);
      // Column j of the sample-b Jacobian; contract with the residual.
      double acc = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double jac = (up.data()[b * dim + i] - down.data()[b * dim + i]) / (2.0 * h);
        acc += jac * (x0[b * dim + i] - fake_data[b * dim + i]);
      }
      report.explicit_route[b * dim + j] = a * acc / static_cast<double>(batch);
    }
  }
  report.max_relative_error = ad::max_relative_error(report.autodiff, report.explicit_route);
  return report;
}

}  // namespace dlab::objectives
