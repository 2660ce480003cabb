#pragma once

#include <vector>

#include "dlab/autodiff/value.hpp"
#include "dlab/rng.hpp"

namespace dlab::ad {

/// Fully connected network: tanh on hidden layers, identity on the output.
class Mlp {
 public:
  /// `widths` = {in, hidden..., out}; at least two entries, all positive.
  Mlp(std::vector<std::size_t> widths, RngStream& rng);

  /// x: [batch, in] -> [batch, out]
  [[nodiscard]] Value forward(const Value& x) const;

  [[nodiscard]] const std::vector<std::size_t>& widths() const { return widths_; }
  /// Weights and biases interleaved: W0, b0, W1, b1, ...
  [[nodiscard]] std::vector<Value> parameters() const;
  [[nodiscard]] std::size_t parameter_count() const;

  /// Deep copy of parameter values (fresh leaves, zero grads).
  [[nodiscard]] Mlp clone() const;

 private:
  Mlp() = default;

  std::vector<std::size_t> widths_;
  std::vector<Value> weights_;
  std::vector<Value> biases_;
};

}  // namespace dlab::ad
