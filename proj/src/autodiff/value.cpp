#include "dlab/autodiff/value.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace dlab::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

ShapeError::ShapeError(const std::string& op, const Shape& lhs, const Shape& rhs)
    : std::invalid_argument(op + ": incompatible shapes " + shape_string(lhs) + " and " +
                            shape_string(rhs)) {}

namespace {

NodePtr make_leaf(std::vector<double> data, Shape shape, bool requires_grad) {
  if (numel(shape) != data.size()) {
    throw ShapeError("leaf", shape, Shape{data.size()});
  }
  auto n = std::make_shared<Node>();
  n->grad.assign(data.size(), 0.0);
  n->data = std::move(data);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return n;
}

thread_local std::size_t g_backward_calls = 0;

// Iterative post-order DFS. Stop-gradient nodes are emitted but their parents
// are not visited through them.
std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const bool blocked = node->stop_grad;
    if (!blocked && next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

void run_backward(Node* start, std::span<const double> seed, std::span<const Value> targets) {
  ++g_backward_calls;
  const auto order = topo_order(start);

  std::unordered_set<const Node*> target_set;
  for (const auto& t : targets) target_set.insert(t.node().get());

  // Parents precede children in `order`, so one forward pass settles reachability.
  for (Node* n : order) {
    if (n->parents.empty()) {
      n->wants_grad = n->requires_grad && (target_set.empty() || target_set.contains(n));
    } else if (n->stop_grad) {
      n->wants_grad = false;
    } else {
      n->wants_grad = std::any_of(n->parents.begin(), n->parents.end(),
                                  [](const NodePtr& p) { return p->wants_grad; });
    }
    if (!n->parents.empty()) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }

  if (!start->wants_grad) return;
  for (std::size_t i = 0; i < seed.size(); ++i) start->grad[i] += seed[i];

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->wants_grad && n->backward_fn) n->backward_fn(*n);
  }
  for (Node* n : order) n->wants_grad = false;
}

}  // namespace

Value Value::constant(std::vector<double> data, Shape shape) {
  return Value(make_leaf(std::move(data), std::move(shape), false));
}

Value Value::scalar(double v) { return constant({v}, {1}); }

Value Value::variable(std::vector<double> data, Shape shape) {
  return Value(make_leaf(std::move(data), std::move(shape), true));
}

std::size_t Value::rows() const {
  const auto& s = shape();
  return s.size() == 2 ? s[0] : 1;
}

std::size_t Value::cols() const {
  const auto& s = shape();
  return s.empty() ? 1 : s.back();
}

double Value::item() const {
  if (size() != 1) throw ShapeError("item", shape(), Shape{1});
  return node_->data[0];
}

void Value::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

std::size_t backward_call_count() { return g_backward_calls; }

void backward(const Value& root, std::span<const Value> targets) {
  if (root.size() != 1) throw ShapeError("backward (root must be scalar)", root.shape(), Shape{1});
  const double one = 1.0;
  run_backward(root.node().get(), std::span<const double>(&one, 1), targets);
}

void backward_seeded(const Value& start, std::span<const double> seed,
                     std::span<const Value> targets) {
  if (seed.size() != start.size()) throw ShapeError("backward_seeded", start.shape(), Shape{seed.size()});
  run_backward(start.node().get(), seed, targets);
}

}  // namespace dlab::ad
