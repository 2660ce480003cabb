#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dlab/autodiff/value.hpp"

namespace dlab::ad {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.0;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  NonFiniteGradient(std::size_t tensor, std::size_t element);
  std::size_t tensor_index;
  std::size_t element_index;
};

/// Adam over a fixed list of parameter leaves, reading their accumulated grads.
class Adam {
 public:
  Adam(std::vector<Value> params, AdamOptions options);

  /// One bias-corrected update. Throws NonFiniteGradient before touching any
  /// parameter if some gradient entry is NaN or infinite.
  void step();
  void zero_grad();
  /// Replaces the step counter and moments (checkpoint restore). Shapes must match.
  void restore(std::int64_t step_count, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v);

  [[nodiscard]] const AdamOptions& options() const { return options_; }
  [[nodiscard]] std::int64_t step_count() const { return step_count_; }
  [[nodiscard]] const std::vector<std::vector<double>>& first_moments() const { return m_; }
  [[nodiscard]] const std::vector<std::vector<double>>& second_moments() const { return v_; }
  [[nodiscard]] const std::vector<Value>& parameters() const { return params_; }

 private:
  std::vector<Value> params_;
  AdamOptions options_;
  std::int64_t step_count_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace dlab::ad
