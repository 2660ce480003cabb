#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "dlab/autodiff/adam.hpp"
#include "dlab/autodiff/gradcheck.hpp"
#include "dlab/autodiff/mlp.hpp"
#include "dlab/autodiff/ops.hpp"
#include "dlab/rng.hpp"

using namespace dlab;
using namespace dlab::ad;

namespace {

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

// Builds a scalar from a single variable leaf and checks backward() against
// central differences of the same builder.
double gradcheck_unary_builder(const std::function<Value(const Value&)>& build, std::vector<double> x0,
                               Shape shape) {
  auto x = Value::variable(x0, shape);
  backward(build(x));
  const auto fd = finite_diff_grad(
      [&](std::span<const double> p) {
        return build(Value::constant({p.begin(), p.end()}, shape)).item();
      },
      x0, 1e-5);
  return max_relative_error(x.grad(), fd);
}

}  // namespace

TEST(AutodiffForward, SquaredNormTanhMatmul) {
  EXPECT_DOUBLE_EQ(squared_norm(Value::constant({3, 4}, {2})).item(), 25.0);
  EXPECT_EQ(tanh(Value::scalar(0.0)).item(), 0.0);
  auto eye = Value::constant({1, 0, 0, 1}, {2, 2});
  auto v = Value::constant({2.5, -1.0}, {2, 1});
  auto out = matmul(eye, v);
  EXPECT_EQ(to_vec(out.data()), to_vec(v.data()));
}

TEST(AutodiffForward, ShapeErrorNamesBothShapes) {
  auto a = Value::constant(std::vector<double>(6, 1.0), {2, 3});
  auto b = Value::constant(std::vector<double>(4, 1.0), {2, 2});
  try {
    (void)add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos);
    EXPECT_NE(msg.find("[2,2]"), std::string::npos);
  }
  EXPECT_THROW((void)matmul(a, a), ShapeError);
  EXPECT_THROW((void)dot(a, b), ShapeError);
}

TEST(AutodiffForward, RowBroadcast) {
  auto m = Value::variable({1, 2, 3, 4, 5, 6}, {2, 3});
  auto row = Value::variable({10, 20, 30}, {3});
  auto out = add(m, row);
  EXPECT_EQ(to_vec(out.data()), (std::vector<double>{11, 22, 33, 14, 25, 36}));
  backward(sum(out));
  EXPECT_EQ(to_vec(row.grad()), (std::vector<double>{2, 2, 2}));
}

TEST(StopGradient, FrozenFactorInProduct) {
  auto x = Value::variable({3.0}, {1});
  backward(mul(stop_gradient(x), x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 3.0);
}

TEST(StopGradient, FrozenSquareHasZeroGradient) {
  auto x = Value::variable({1.7}, {1});
  backward(stop_gradient(square(x)));
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(StopGradient, HalfSquaredDistanceToFrozenTarget) {
  auto a = Value::variable({1.0, -2.0}, {2});
  auto b = Value::variable({0.5, 0.5}, {2});
  backward(scale(squared_norm(sub(stop_gradient(a), b)), 0.5));
  EXPECT_EQ(to_vec(a.grad()), (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(to_vec(b.grad()), (std::vector<double>{-0.5, 2.5}));
}

TEST(StopGradient, DataIsBitIdentical) {
  RngStream rng(11);
  auto x = Value::variable(rng.normal_vector(17), {17});
  auto y = stop_gradient(x);
  EXPECT_EQ(to_vec(x.data()), to_vec(y.data()));
}

TEST(StopGradient, LossOfFrozenLeavesHasZeroGradient) {
  RngStream rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = Value::variable(rng.normal_vector(4), {2, 2});
    auto b = Value::variable(rng.normal_vector(4), {2, 2});
    auto sa = stop_gradient(a), sb = stop_gradient(b);
    auto loss = sum(tanh(matmul(sa, sb))) + squared_norm(sa * sb) + dot(exp(sa), sb);
    backward(loss);
    for (double g : a.grad()) EXPECT_EQ(g, 0.0);
    for (double g : b.grad()) EXPECT_EQ(g, 0.0);
  }
}

TEST(Backward, LinearLeastSquaresMatchesFiniteDifference) {
  RngStream rng(3);
  const auto x = rng.normal_vector(12);  // [4,3]
  const auto y = rng.normal_vector(8);   // [4,2]
  const auto w0 = rng.normal_vector(6);  // [3,2]
  auto build = [&](const Value& w) {
    auto r = sub(matmul(Value::constant(x, {4, 3}), w), Value::constant(y, {4, 2}));
    return scale(squared_norm(r), 0.5);
  };
  EXPECT_LT(gradcheck_unary_builder(build, w0, {3, 2}), 1e-6);
}

TEST(Backward, ConstantRootGivesZeroGradients) {
  auto w = Value::variable({1.0, 2.0}, {2});
  backward(add(Value::scalar(5.0), scale(sum(w), 0.0)));
  EXPECT_EQ(to_vec(w.grad()), (std::vector<double>{0.0, 0.0}));
}

TEST(Backward, RepeatedCallsAccumulate) {
  auto w = Value::variable({1.5, -0.5}, {2});
  auto loss = squared_norm(tanh(w));
  backward(loss);
  const auto once = to_vec(w.grad());
  backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_DOUBLE_EQ(w.grad()[i], 2.0 * once[i]);
}

TEST(Backward, NonScalarRootThrows) {
  auto w = Value::variable({1.0, 2.0}, {2});
  EXPECT_THROW(backward(tanh(w)), ShapeError);
}

TEST(Backward, TargetsLeaveOtherLeavesUntouched) {
  auto a = Value::variable({1.0, 2.0}, {2});
  auto b = Value::variable({3.0, -1.0}, {2});
  auto loss = dot(tanh(a), b);
  std::vector<Value> only_a{a};
  backward(loss, only_a);
  EXPECT_NE(a.grad()[0], 0.0);
  EXPECT_EQ(to_vec(b.grad()), (std::vector<double>{0.0, 0.0}));
}

TEST(Backward, SeededSweepIsVectorJacobianProduct) {
  auto w = Value::variable({0.3, -0.7}, {2});
  auto out = scale(w, 3.0);
  const std::vector<double> seed{1.0, 2.0};
  backward_seeded(out, seed);
  EXPECT_EQ(to_vec(w.grad()), (std::vector<double>{3.0, 6.0}));
}

TEST(Backward, DeterministicBitIdentical) {
  auto run = [] {
    RngStream rng(99);
    Mlp net({3, 8, 8, 2}, rng);
    auto x = Value::constant(rng.normal_vector(15), {5, 3});
    backward(squared_norm(net.forward(x)));
    std::vector<double> all;
    for (const auto& p : net.parameters()) all.insert(all.end(), p.grad().begin(), p.grad().end());
    return all;
  };
  EXPECT_EQ(run(), run());
}

TEST(Backward, CounterIncrementsPerCall) {
  auto w = Value::variable({1.0}, {1});
  const auto before = backward_call_count();
  backward(square(w));
  backward(square(w));
  EXPECT_EQ(backward_call_count() - before, 2u);
}

// Every op against central differences at 20 random points.
TEST(Backward, EveryOpMatchesFiniteDifferences) {
  RngStream rng(2024);
  const auto other = rng.normal_vector(6);
  const std::vector<std::pair<const char*, std::function<Value(const Value&)>>> cases = {
      {"add", [&](const Value& x) { return squared_norm(add(x, Value::constant(other, {2, 3}))); }},
      {"sub", [&](const Value& x) { return squared_norm(sub(Value::constant(other, {2, 3}), x)); }},
      {"mul", [&](const Value& x) { return sum(mul(x, tanh(x))); }},
      {"div", [&](const Value& x) { return sum(div(x, add_scalar(square(x), 1.0))); }},
      {"neg_scale", [&](const Value& x) { return sum(tanh(scale(neg(x), 1.7))); }},
      {"exp_log", [&](const Value& x) { return sum(log(add_scalar(exp(x), 0.5))); }},
      {"log_cosh", [&](const Value& x) { return sum(log_cosh(scale(x, 3.0))); }},
      {"matmul", [&](const Value& x) { return squared_norm(matmul(x, Value::constant(other, {3, 2}))); }},
      {"mean", [&](const Value& x) { return mean(square(tanh(x))); }},
      {"dot", [&](const Value& x) { return dot(x, square(x)); }},
      {"concat", [&](const Value& x) { return squared_norm(tanh(concat_cols(x, scale(x, 2.0)))); }},
      {"slice", [&](const Value& x) { return squared_norm(slice_cols(tanh(x), 1, 3)); }},
      {"row_bcast", [&](const Value& x) { return squared_norm(add(x, Value::constant({1, 2, 3}, {3}))); }},
  };
  for (const auto& [name, build] : cases) {
    for (int point = 0; point < 20; ++point) {
      EXPECT_LT(gradcheck_unary_builder(build, rng.normal_vector(6), {2, 3}), 1e-4) << name;
    }
  }
}

TEST(FiniteDiff, SquareAtTwo) {
  const std::vector<double> x{2.0};
  auto g = finite_diff_grad([](std::span<const double> p) { return p[0] * p[0]; }, x, 1e-5);
  EXPECT_NEAR(g[0], 4.0, 1e-8);
}

TEST(FiniteDiff, ConstantFunction) {
  const std::vector<double> x{1.0, -3.0, 2.0};
  auto g = finite_diff_grad([](std::span<const double>) { return 7.0; }, x);
  EXPECT_EQ(g, (std::vector<double>{0.0, 0.0, 0.0}));
}

TEST(Mlp, ParameterCountAndDeterminism) {
  RngStream rng(5);
  Mlp net({3, 16, 16, 2}, rng);
  EXPECT_EQ(net.parameter_count(), 3u * 16 + 16 + 16 * 16 + 16 + 16 * 2 + 2);
  auto x = Value::constant({0.1, 0.2, 0.3}, {1, 3});
  EXPECT_EQ(to_vec(net.forward(x).data()), to_vec(net.forward(x).data()));
  EXPECT_THROW(Mlp({3}, rng), std::invalid_argument);
  EXPECT_THROW(Mlp({3, 0, 1}, rng), std::invalid_argument);
}

TEST(Mlp, CloneIsIndependent) {
  RngStream rng(6);
  Mlp net({2, 4, 1}, rng);
  Mlp copy = net.clone();
  copy.parameters()[0].mutable_data()[0] += 1.0;
  EXPECT_NE(net.parameters()[0].data()[0], copy.parameters()[0].data()[0]);
}

TEST(Adam, FirstStepWithZeroBeta1) {
  auto p = Value::variable({0.0}, {1});
  Adam opt({p}, {.lr = 0.05, .beta1 = 0.0, .beta2 = 0.999, .eps = 1e-8});
  p.node()->grad[0] = 1.0;
  opt.step();
  EXPECT_NEAR(p.data()[0], -0.05, 1e-9);
  EXPECT_EQ(opt.step_count(), 1);
  EXPECT_EQ(opt.first_moments()[0].size(), p.size());
}

TEST(Adam, ZeroGradientLeavesParameter) {
  auto p = Value::variable({1.25, -3.0}, {2});
  Adam opt({p}, {});
  opt.step();
  EXPECT_EQ(to_vec(p.data()), (std::vector<double>{1.25, -3.0}));
}

// Hand trace with beta1 = 0, beta2 = 0: v_hat = g^2 each step, so the update is
// lr * g / (|g| + eps) -> lr * sign(g) for both steps.
TEST(Adam, ZeroBeta2DegeneratesToSignSgd) {
  auto p = Value::variable({1.0, 1.0}, {2});
  Adam opt({p}, {.lr = 0.1, .beta1 = 0.0, .beta2 = 0.0, .eps = 1e-12});
  for (int s = 0; s < 2; ++s) {
    p.node()->grad = {4.0, -0.25};
    opt.step();
  }
  EXPECT_NEAR(p.data()[0], 1.0 - 0.2, 1e-10);
  EXPECT_NEAR(p.data()[1], 1.0 + 0.2, 1e-10);
}

TEST(Adam, NonFiniteGradientReportsIndex) {
  auto a = Value::variable({1.0}, {1});
  auto b = Value::variable({1.0, 2.0, 3.0}, {3});
  Adam opt({a, b}, {});
  b.node()->grad[2] = std::nan("");
  try {
    opt.step();
    FAIL();
  } catch (const NonFiniteGradient& e) {
    EXPECT_EQ(e.tensor_index, 1u);
    EXPECT_EQ(e.element_index, 2u);
  }
  EXPECT_EQ(b.data()[0], 1.0);
}

TEST(Rng, SplitStreamsAreReproducibleAndIndependent) {
  RngStream root(42);
  auto a1 = root.split(1), a2 = root.split(1), b = root.split(2);
  for (int i = 0; i < 10; ++i) {
    const double x = a1.normal();
    EXPECT_EQ(x, a2.normal());
    EXPECT_NE(x, b.normal());
  }
}
