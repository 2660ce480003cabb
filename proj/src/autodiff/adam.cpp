#include "dlab/autodiff/adam.hpp"

#include <cmath>
#include <string>

namespace dlab::ad {

NonFiniteGradient::NonFiniteGradient(std::size_t tensor, std::size_t element)
    : std::runtime_error("Adam: non-finite gradient in parameter " + std::to_string(tensor) +
                         " element " + std::to_string(element)),
      tensor_index(tensor),
      element_index(element) {}

Adam::Adam(std::vector<Value> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.lr > 0.0)) throw std::invalid_argument("Adam: lr must be positive");
  if (options_.beta1 < 0.0 || options_.beta1 >= 1.0 || options_.beta2 < 0.0 || options_.beta2 >= 1.0) {
    throw std::invalid_argument("Adam: betas must lie in [0, 1)");
  }
  if (!(options_.eps > 0.0)) throw std::invalid_argument("Adam: eps must be positive");
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step() {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const auto g = params_[k].grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) throw NonFiniteGradient(k, i);
    }
  }
  ++step_count_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto data = params_[k].mutable_data();
    const auto g = params_[k].grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < data.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      data[i] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::restore(std::int64_t step_count, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v) {
  if (step_count < 0) throw std::invalid_argument("Adam::restore: negative step count");
  if (m.size() != params_.size() || v.size() != params_.size()) {
    throw std::invalid_argument("Adam::restore: moment count does not match parameters");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (m[i].size() != params_[i].size() || v[i].size() != params_[i].size()) {
      throw std::invalid_argument("Adam::restore: moment shape does not match parameter " + std::to_string(i));
    }
  }
  step_count_ = step_count;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace dlab::ad
