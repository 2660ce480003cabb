#include "dlab/diffusion/predictor.hpp"

#include <algorithm>
#include <stdexcept>

#include "dlab/autodiff/ops.hpp"

namespace dlab::diffusion {

MlpPredictor::MlpPredictor(ad::Mlp net) : net_(std::move(net)) {
  if (net_.widths().front() != net_.widths().back() + 1) {
    throw std::invalid_argument("MlpPredictor: input width must be output width + 1");
  }
}

namespace {
ad::Mlp build_mlp(std::size_t dim, const std::vector<std::size_t>& hidden, RngStream& rng) {
  std::vector<std::size_t> widths{dim + 1};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(dim);
  return ad::Mlp(std::move(widths), rng);
}
}  // namespace

MlpPredictor::MlpPredictor(std::size_t dim, const std::vector<std::size_t>& hidden, RngStream& rng)
    : MlpPredictor(build_mlp(dim, hidden, rng)) {}

ad::Value MlpPredictor::predict(const ad::Value& xt, double t) const {
  const std::size_t batch = xt.rows();
  auto tcol = ad::Value::constant(std::vector<double>(batch, t), {batch, 1});
  return net_.forward(ad::concat_cols(xt, tcol));
}

std::unique_ptr<XPredictor> MlpPredictor::clone() const {
  return std::make_unique<MlpPredictor>(net_.clone());
}

LinearPredictor::LinearPredictor(std::vector<double> scale, std::vector<double> shift) {
  if (scale.size() != shift.size() || scale.empty()) {
    throw std::invalid_argument("LinearPredictor: scale and shift must have equal non-zero length");
  }
  const std::size_t d = scale.size();
  scale_ = ad::Value::variable(std::move(scale), {d});
  shift_ = ad::Value::variable(std::move(shift), {d});
}

ad::Value LinearPredictor::predict(const ad::Value& xt, double) const {
  return ad::add(ad::mul(xt, scale_), shift_);
}

std::unique_ptr<XPredictor> LinearPredictor::clone() const {
  return std::make_unique<LinearPredictor>(std::vector<double>(scale_.data().begin(), scale_.data().end()),
                                           std::vector<double>(shift_.data().begin(), shift_.data().end()));
}

MatrixPredictor::MatrixPredictor(std::vector<double> weights, std::size_t dim) {
  if (weights.size() != dim * dim) throw std::invalid_argument("MatrixPredictor: weights must be dim x dim");
  weights_ = ad::Value::variable(std::move(weights), {dim, dim});
}

ad::Value MatrixPredictor::predict(const ad::Value& xt, double) const { return ad::matmul(xt, weights_); }

std::unique_ptr<XPredictor> MatrixPredictor::clone() const {
  return std::make_unique<MatrixPredictor>(
      std::vector<double>(weights_.data().begin(), weights_.data().end()), weights_.shape()[0]);
}

ad::Value FunctionPredictor::predict(const ad::Value& xt, double t) const {
  auto out = fn_(xt.data(), xt.cols(), t);
  if (out.size() != xt.size()) throw ad::ShapeError("FunctionPredictor", xt.shape(), ad::Shape{out.size()});
  return ad::Value::constant(std::move(out), xt.shape());
}

std::unique_ptr<XPredictor> FunctionPredictor::clone() const { return std::make_unique<FunctionPredictor>(fn_); }

void copy_parameters(const XPredictor& src, XPredictor& dst) {
  const auto from = src.parameters();
  auto to = dst.parameters();
  if (from.size() != to.size()) throw std::invalid_argument("copy_parameters: layout mismatch");
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i].shape() != to[i].shape()) throw ad::ShapeError("copy_parameters", from[i].shape(), to[i].shape());
    std::copy(from[i].data().begin(), from[i].data().end(), to[i].mutable_data().begin());
  }
}

}  // namespace dlab::diffusion
