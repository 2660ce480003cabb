#include "dlab/autodiff/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "dlab/autodiff/ops.hpp"

namespace dlab::ad {

Mlp::Mlp(std::vector<std::size_t> widths, RngStream& rng) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
  for (auto w : widths_) {
    if (w == 0) throw std::invalid_argument("Mlp: layer widths must be positive");
  }
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const std::size_t fan_in = widths_[l], fan_out = widths_[l + 1];
    const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> w(fan_in * fan_out);
    for (auto& v : w) v = stddev * rng.normal();
    weights_.push_back(Value::variable(std::move(w), {fan_in, fan_out}));
    biases_.push_back(Value::variable(std::vector<double>(fan_out, 0.0), {fan_out}));
  }
}

Value Mlp::forward(const Value& x) const {
  if (x.shape().size() != 2 || x.shape()[1] != widths_.front()) {
    throw ShapeError("Mlp::forward", x.shape(), Shape{0, widths_.front()});
  }
  Value h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = add(matmul(h, weights_[l]), biases_[l]);
    if (l + 1 < weights_.size()) h = tanh(h);
  }
  return h;
}

std::vector<Value> Mlp::parameters() const {
  std::vector<Value> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(weights_[l]);
    out.push_back(biases_[l]);
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.size();
  return n;
}

Mlp Mlp::clone() const {
  Mlp copy;
  copy.widths_ = widths_;
  for (const auto& w : weights_) {
    copy.weights_.push_back(Value::variable({w.data().begin(), w.data().end()}, w.shape()));
  }
  for (const auto& b : biases_) {
    copy.biases_.push_back(Value::variable({b.data().begin(), b.data().end()}, b.shape()));
  }
  return copy;
}

}  // namespace dlab::ad
