#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "dlab/autodiff/mlp.hpp"
#include "dlab/autodiff/value.hpp"

namespace dlab::diffusion {

/// A network mapping (x_t, t) to a prediction of x0. Used for both the
/// generator G_theta and the fake score mu_psi.
class XPredictor {
 public:
  virtual ~XPredictor() = default;
  /// xt: [batch, dim] -> [batch, dim]
  [[nodiscard]] virtual ad::Value predict(const ad::Value& xt, double t) const = 0;
  [[nodiscard]] virtual std::vector<ad::Value> parameters() const = 0;
  [[nodiscard]] virtual std::unique_ptr<XPredictor> clone() const = 0;
};

/// MLP on [x_t, t] with widths {dim + 1, hidden..., dim}.
class MlpPredictor final : public XPredictor {
 public:
  explicit MlpPredictor(ad::Mlp net);
  MlpPredictor(std::size_t dim, const std::vector<std::size_t>& hidden, RngStream& rng);

  [[nodiscard]] ad::Value predict(const ad::Value& xt, double t) const override;
  [[nodiscard]] std::vector<ad::Value> parameters() const override { return net_.parameters(); }
  [[nodiscard]] std::unique_ptr<XPredictor> clone() const override;
  [[nodiscard]] const ad::Mlp& net() const { return net_; }

 private:
  ad::Mlp net_;
};

/// Per-coordinate affine map x0 = scale * x_t + shift, independent of t.
class LinearPredictor final : public XPredictor {
 public:
  LinearPredictor(std::vector<double> scale, std::vector<double> shift);

  [[nodiscard]] ad::Value predict(const ad::Value& xt, double t) const override;
  [[nodiscard]] std::vector<ad::Value> parameters() const override { return {scale_, shift_}; }
  [[nodiscard]] std::unique_ptr<XPredictor> clone() const override;

 private:
  ad::Value scale_;
  ad::Value shift_;
};

/// Full matrix map x0 = x_t W (no bias). Used where a closed-form Jacobian is needed.
class MatrixPredictor final : public XPredictor {
 public:
  /// `weights` row-major [dim, dim].
  MatrixPredictor(std::vector<double> weights, std::size_t dim);

  [[nodiscard]] ad::Value predict(const ad::Value& xt, double t) const override;
  [[nodiscard]] std::vector<ad::Value> parameters() const override { return {weights_}; }
  [[nodiscard]] std::unique_ptr<XPredictor> clone() const override;

 private:
  ad::Value weights_;
};

/// Wraps a non-differentiable prediction rule (e.g. an analytic teacher).
/// Outputs are constants on the tape.
class FunctionPredictor final : public XPredictor {
 public:
  using Fn = std::function<std::vector<double>(std::span<const double> xt, std::size_t dim, double t)>;
  explicit FunctionPredictor(Fn fn) : fn_(std::move(fn)) {}

  [[nodiscard]] ad::Value predict(const ad::Value& xt, double t) const override;
  [[nodiscard]] std::vector<ad::Value> parameters() const override { return {}; }
  [[nodiscard]] std::unique_ptr<XPredictor> clone() const override;

 private:
  Fn fn_;
};

/// Copies parameter values from `src` into `dst`; both must have the same layout.
void copy_parameters(const XPredictor& src, XPredictor& dst);

}  // namespace dlab::diffusion
