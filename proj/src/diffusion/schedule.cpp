#include "dlab/diffusion/schedule.hpp"

#include <stdexcept>

#include "dlab/autodiff/ops.hpp"

namespace dlab::diffusion {
namespace {

void require_t(double t, double t_min, const char* what) {
  if (!(t >= t_min && t <= 1.0)) {
    throw std::invalid_argument(std::string(what) + ": t = " + std::to_string(t) + " outside [" +
                                std::to_string(t_min) + ", 1]");
  }
}

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": size mismatch");
}

}  // namespace

std::vector<double> default_sampling_ladder() { return {1.0, 0.96, 0.889, 0.727}; }

std::vector<double> default_train_timesteps() { return {0.98, 0.96, 0.889, 0.727}; }

void validate_ladder(std::span<const double> ladder, const std::string& what) {
  if (ladder.empty()) throw std::invalid_argument(what + ": ladder is empty");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (!(ladder[i] > 0.0 && ladder[i] <= 1.0)) {
      throw std::invalid_argument(what + ": timestep " + std::to_string(ladder[i]) + " outside (0, 1]");
    }
    if (i > 0 && !(ladder[i] < ladder[i - 1])) {
      throw std::invalid_argument(what + ": ladder must be strictly descending");
    }
  }
}

void NoiseSchedule::validate() const {
  if (!(t_min > 0.0 && t_min < 1.0)) throw std::invalid_argument("schedule: t_min must lie in (0, 1)");
  validate_ladder(sampling_ladder, "sampling ladder");
  validate_ladder(train_timesteps, "train timesteps");
  if (train_timesteps.back() < t_min) throw std::invalid_argument("train timesteps: values below t_min");
}

double c_weight(double t, double t_min) {
  require_t(t, t_min, "c_weight");
  const double a = alpha(t), s = sigma(t);
  return (a * a) / (s * s * s * s);
}

ad::Value forward_noise(const ad::Value& x0, double t, std::span<const double> eps, double t_min) {
  require_t(t, t_min, "forward_noise");
  require_same_size(x0.size(), eps.size(), "forward_noise");
  std::vector<double> noise(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) noise[i] = sigma(t) * eps[i];
  return ad::add(ad::scale(x0, alpha(t)), ad::Value::constant(std::move(noise), x0.shape()));
}

std::vector<double> forward_noise(std::span<const double> x0, double t, std::span<const double> eps,
                                  double t_min) {
  require_t(t, t_min, "forward_noise");
  require_same_size(x0.size(), eps.size(), "forward_noise");
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = alpha(t) * x0[i] + sigma(t) * eps[i];
  return out;
}

std::vector<double> score_from_xpred(std::span<const double> mu, std::span<const double> xt, double t) {
  require_same_size(mu.size(), xt.size(), "score_from_xpred");
  const double a = alpha(t), s2 = sigma(t) * sigma(t);
  std::vector<double> out(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) out[i] = (a * mu[i] - xt[i]) / s2;
  return out;
}

std::vector<double> xpred_from_score(std::span<const double> score, std::span<const double> xt, double t) {
  require_same_size(score.size(), xt.size(), "xpred_from_score");
  const double a = alpha(t), s2 = sigma(t) * sigma(t);
  std::vector<double> out(score.size());
  for (std::size_t i = 0; i < score.size(); ++i) out[i] = (xt[i] + s2 * score[i]) / a;
  return out;
}

}  // namespace dlab::diffusion
