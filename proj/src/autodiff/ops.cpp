#include "dlab/autodiff/ops.hpp"

#include <cmath>

namespace dlab::ad {
namespace {

enum class Broadcast { Same, Scalar, Row };

std::size_t source_index(Broadcast mode, std::size_t i, std::size_t cols) {
  switch (mode) {
    case Broadcast::Same: return i;
    case Broadcast::Scalar: return 0;
    case Broadcast::Row: return i % cols;
  }
  return i;
}

bool is_row_of(const Value& row, const Value& mat) {
  const auto& ms = mat.shape();
  const auto& rs = row.shape();
  if (ms.size() != 2) return false;
  return (rs.size() == 1 && rs[0] == ms[1]) || (rs.size() == 2 && rs[0] == 1 && rs[1] == ms[1]);
}

struct Plan {
  Shape out;
  Broadcast a_mode = Broadcast::Same;
  Broadcast b_mode = Broadcast::Same;
  std::size_t cols = 1;
};

Plan plan_binary(const char* name, const Value& a, const Value& b) {
  if (a.shape() == b.shape()) return {a.shape(), Broadcast::Same, Broadcast::Same, a.cols()};
  if (b.size() == 1) return {a.shape(), Broadcast::Same, Broadcast::Scalar, a.cols()};
  if (a.size() == 1) return {b.shape(), Broadcast::Scalar, Broadcast::Same, b.cols()};
  if (is_row_of(b, a)) return {a.shape(), Broadcast::Same, Broadcast::Row, a.cols()};
  if (is_row_of(a, b)) return {b.shape(), Broadcast::Row, Broadcast::Same, b.cols()};
  throw ShapeError(name, a.shape(), b.shape());
}

NodePtr make_node(const char* name, std::vector<double> data, Shape shape, std::vector<NodePtr> parents) {
  auto n = std::make_shared<Node>();
  n->grad.assign(data.size(), 0.0);
  n->data = std::move(data);
  n->shape = std::move(shape);
  n->op = name;
  n->parents = std::move(parents);
  return n;
}

// f(x, y) is the forward map; da/db return the partial derivatives at (x, y).
template <class F, class DA, class DB>
Value binary(const char* name, const Value& a, const Value& b, F f, DA da, DB db) {
  const Plan plan = plan_binary(name, a, b);
  const std::size_t n = numel(plan.out);
  std::vector<double> out(n);
  const auto& x = a.node()->data;
  const auto& y = b.node()->data;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = f(x[source_index(plan.a_mode, i, plan.cols)], y[source_index(plan.b_mode, i, plan.cols)]);
  }
  auto node = make_node(name, std::move(out), plan.out, {a.node(), b.node()});
  node->backward_fn = [plan, da, db](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const std::size_t ia = source_index(plan.a_mode, i, plan.cols);
      const std::size_t ib = source_index(plan.b_mode, i, plan.cols);
      const double g = self.grad[i];
      if (pa.wants_grad) pa.grad[ia] += g * da(pa.data[ia], pb.data[ib]);
      if (pb.wants_grad) pb.grad[ib] += g * db(pa.data[ia], pb.data[ib]);
    }
  };
  return Value(std::move(node));
}

// df(x, y) is the derivative given input x and output y.
template <class F, class DF>
Value unary(const char* name, const Value& a, F f, DF df) {
  const auto& x = a.node()->data;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  auto node = make_node(name, std::move(out), a.shape(), {a.node()});
  node->backward_fn = [df](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * df(p.data[i], self.data[i]);
  };
  return Value(std::move(node));
}

double stable_log_cosh(double x) {
  const double ax = std::abs(x);
  return ax + std::log1p(std::exp(-2.0 * ax)) - std::log(2.0);
}

std::size_t rows_of(const Value& v) { return v.shape().size() == 2 ? v.shape()[0] : 1; }

void require_matrix(const char* name, const Value& v) {
  if (v.shape().size() != 2) throw ShapeError(name, v.shape(), Shape{0, 0});
}

}  // namespace

Value add(const Value& a, const Value& b) {
  return binary("add", a, b, [](double x, double y) { return x + y; },
                [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Value sub(const Value& a, const Value& b) {
  return binary("sub", a, b, [](double x, double y) { return x - y; },
                [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Value mul(const Value& a, const Value& b) {
  return binary("mul", a, b, [](double x, double y) { return x * y; },
                [](double, double y) { return y; }, [](double x, double) { return x; });
}

Value div(const Value& a, const Value& b) {
  return binary("div", a, b, [](double x, double y) { return x / y; },
                [](double, double y) { return 1.0 / y; },
                [](double x, double y) { return -x / (y * y); });
}

Value neg(const Value& a) {
  return unary("neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Value scale(const Value& a, double k) {
  return unary("scale", a, [k](double x) { return k * x; }, [k](double, double) { return k; });
}

Value add_scalar(const Value& a, double k) {
  return unary("add_scalar", a, [k](double x) { return x + k; }, [](double, double) { return 1.0; });
}

Value square(const Value& a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Value tanh(const Value& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Value exp(const Value& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Value log(const Value& a) {
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Value log_cosh(const Value& a) {
  return unary("log_cosh", a, stable_log_cosh, [](double x, double) { return std::tanh(x); });
}

Value matmul(const Value& a, const Value& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) throw ShapeError("matmul", a.shape(), b.shape());
  std::vector<double> out(m * n, 0.0);
  const auto& x = a.node()->data;
  const auto& w = b.node()->data;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double xip = x[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += xip * w[p * n + j];
    }
  }
  auto node = make_node("matmul", std::move(out), {m, n}, {a.node(), b.node()});
  node->backward_fn = [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const auto& g = self.grad;
    if (pa.wants_grad) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * pb.data[p * n + j];
          pa.grad[i * k + p] += acc;
        }
    }
    if (pb.wants_grad) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double xip = pa.data[i * k + p];
          for (std::size_t j = 0; j < n; ++j) pb.grad[p * n + j] += xip * g[i * n + j];
        }
    }
  };
  return Value(std::move(node));
}

Value sum(const Value& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  auto node = make_node("sum", {s}, {1}, {a.node()});
  node->backward_fn = [](Node& self) {
    Node& p = *self.parents[0];
    for (auto& g : p.grad) g += self.grad[0];
  };
  return Value(std::move(node));
}

Value mean(const Value& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Value squared_norm(const Value& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  auto node = make_node("squared_norm", {s}, {1}, {a.node()});
  node->backward_fn = [](Node& self) {
    Node& p = *self.parents[0];
    const double g2 = 2.0 * self.grad[0];
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g2 * p.data[i];
  };
  return Value(std::move(node));
}

Value dot(const Value& a, const Value& b) {
  if (a.shape() != b.shape()) throw ShapeError("dot", a.shape(), b.shape());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  auto node = make_node("dot", {s}, {1}, {a.node(), b.node()});
  node->backward_fn = [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const double g = self.grad[0];
    for (std::size_t i = 0; i < pa.data.size(); ++i) {
      if (pa.wants_grad) pa.grad[i] += g * pb.data[i];
      if (pb.wants_grad) pb.grad[i] += g * pa.data[i];
    }
  };
  return Value(std::move(node));
}

Value concat_cols(const Value& a, const Value& b) {
  require_matrix("concat_cols", a);
  require_matrix("concat_cols", b);
  const std::size_t r = a.shape()[0];
  if (b.shape()[0] != r) throw ShapeError("concat_cols", a.shape(), b.shape());
  const std::size_t ca = a.shape()[1], cb = b.shape()[1], c = ca + cb;
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < ca; ++j) out[i * c + j] = a.data()[i * ca + j];
    for (std::size_t j = 0; j < cb; ++j) out[i * c + ca + j] = b.data()[i * cb + j];
  }
  auto node = make_node("concat_cols", std::move(out), {r, c}, {a.node(), b.node()});
  node->backward_fn = [r, ca, cb, c](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t i = 0; i < r; ++i) {
      if (pa.wants_grad)
        for (std::size_t j = 0; j < ca; ++j) pa.grad[i * ca + j] += self.grad[i * c + j];
      if (pb.wants_grad)
        for (std::size_t j = 0; j < cb; ++j) pb.grad[i * cb + j] += self.grad[i * c + ca + j];
    }
  };
  return Value(std::move(node));
}

Value slice_cols(const Value& a, std::size_t begin, std::size_t end) {
  require_matrix("slice_cols", a);
  const std::size_t r = rows_of(a), c = a.shape()[1];
  if (begin >= end || end > c) throw ShapeError("slice_cols", a.shape(), Shape{begin, end});
  const std::size_t w = end - begin;
  std::vector<double> out(r * w);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = a.data()[i * c + begin + j];
  auto node = make_node("slice_cols", std::move(out), {r, w}, {a.node()});
  node->backward_fn = [r, c, w, begin](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) p.grad[i * c + begin + j] += self.grad[i * w + j];
  };
  return Value(std::move(node));
}

Value stop_gradient(const Value& a) {
  auto node = make_node("stop_gradient", a.node()->data, a.shape(), {a.node()});
  node->stop_grad = true;
  return Value(std::move(node));
}

}  // namespace dlab::ad
