#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dlab::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Raised by any op whose operands have incompatible shapes.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(const std::string& op, const Shape& lhs, const Shape& rhs);
};

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One vertex of the define-by-run tape.
struct Node {
  std::vector<double> data;
  std::vector<double> grad;
  Shape shape;
  const char* op = "leaf";
  std::vector<NodePtr> parents;
  /// Reads `grad` of this node and accumulates into parents whose `wants_grad` is set.
  std::function<void(Node&)> backward_fn;
  bool stop_grad = false;
  bool requires_grad = false;  // leaves only
  bool wants_grad = false;     // transient, set during backward()
};

/// Handle to a tape node. Copies share the node.
class Value {
 public:
  Value() = default;
  explicit Value(NodePtr node) : node_(std::move(node)) {}

  /// Leaf that never receives gradient.
  static Value constant(std::vector<double> data, Shape shape);
  static Value scalar(double v);
  /// Leaf that accumulates gradient (parameters, probe inputs).
  static Value variable(std::vector<double> data, Shape shape);

  [[nodiscard]] const Shape& shape() const { return node_->shape; }
  [[nodiscard]] std::size_t size() const { return node_->data.size(); }
  [[nodiscard]] std::size_t rows() const;
  [[nodiscard]] std::size_t cols() const;
  [[nodiscard]] std::span<const double> data() const { return node_->data; }
  [[nodiscard]] std::span<double> mutable_data() { return node_->data; }
  [[nodiscard]] std::span<const double> grad() const { return node_->grad; }
  [[nodiscard]] double item() const;
  [[nodiscard]] const char* op() const { return node_->op; }
  [[nodiscard]] bool is_leaf() const { return node_->parents.empty(); }
  [[nodiscard]] bool is_stop_gradient() const { return node_->stop_grad; }
  [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }

  void zero_grad();

  [[nodiscard]] const NodePtr& node() const { return node_; }
  [[nodiscard]] bool defined() const { return node_ != nullptr; }

 private:
  NodePtr node_;
};

/// Number of backward() / backward_seeded() calls on this thread.
/// Trainers read deltas of this counter to assert their per-iteration pass count.
std::size_t backward_call_count();

/// Reverse sweep from a scalar root. Leaves accumulate into their grad; all
/// interior grads are reset first, so after the call an interior node's grad is
/// d(root)/d(node) for this call alone.
///
/// When `targets` is non-empty, only paths ending in those leaves are walked;
/// other leaves (e.g. a frozen network's parameters) are left untouched.
void backward(const Value& root, std::span<const Value> targets = {});

/// Same sweep, but seeded with an arbitrary upstream gradient on `start`
/// (a vector-Jacobian product). `seed` must match start's shape.
void backward_seeded(const Value& start, std::span<const double> seed,
                     std::span<const Value> targets = {});

}  // namespace dlab::ad
