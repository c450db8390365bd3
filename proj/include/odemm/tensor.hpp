#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace odemm::ad {

// Raised when a non-finite value is produced or detected.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major tensor of doubles. Rank 0 (scalar), 1 or 2.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> shape_, std::vector<double> data_);

  static Tensor zeros(const std::vector<int>& shape);
  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> v);
  static Tensor matrix(int rows, int cols, std::vector<double> v);

  int numel() const;
  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }

  double& at(int i) { return data[static_cast<size_t>(i)]; }
  double at(int i) const { return data[static_cast<size_t>(i)]; }
  double& at(int i, int j) { return data[static_cast<size_t>(i) * cols() + j]; }
  double at(int i, int j) const { return data[static_cast<size_t>(i) * cols() + j]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
  std::string shape_str() const;
};

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
};

// Append-only record of the forward computation. Node inputs always
// reference earlier nodes, so reverse iteration is a valid topological
// order for the backward sweep.
class Tape {
 public:
  struct Node {
    Tensor value;
    std::vector<int> parents;
    // Accumulates d(root)/d(parent) into grads given d(root)/d(this).
    // Null for leaves.
    std::function<void(const Tensor& g, std::vector<Tensor>& grads)> backprop;
  };

  Var leaf(Tensor value);
  Var record(Tensor value, std::vector<int> parents,
             std::function<void(const Tensor&, std::vector<Tensor>&)> backprop);

  const Tensor& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<Node>& nodes() const { return nodes_; }

  // When set, every recorded value is checked for NaN/Inf.
  bool debug_checks = false;

 private:
  std::vector<Node> nodes_;
};

// Primitives. Shapes must conform exactly; no broadcasting beyond scale().
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var matmul(Var a, Var b);  // (m x n)·(n x p) -> (m x p), or (m x n)·(n) -> (m)
Var concat(const std::vector<Var>& parts, int axis);
Var slice(Var v, int axis, int start, int end);
Var tanh(Var v);
Var sigmoid(Var v);
Var softmax(Var v);  // 1-D only
Var sum(Var v);      // -> scalar
Var mean(Var v);     // over all entries -> scalar
Var mean_cols(Var m);  // (r x c) -> (r), mean over the column axis
Var scale(Var v, double c);
Var log(Var v);
Var clamp(Var v, double lo, double hi);  // gradient zero where clamped

Var dot(Var a, Var b);  // sum(mul(a, b))

// Reverse sweep from a scalar root. Returns gradients indexed by node id;
// nodes not influencing the root get zero gradients of matching shape.
std::vector<Tensor> backward(Tape& tape, Var root);

// Binds parameter tensors to tape leaves, one leaf per tensor per forward
// pass. After backward(), the leaf id recovers each parameter's gradient.
class Binder {
 public:
  explicit Binder(Tape& tape) : tape_(&tape) {}

  Var operator()(const Tensor& t) {
    auto it = bound_.find(&t);
    if (it != bound_.end()) return it->second;
    Var v = tape_->leaf(t);
    bound_.emplace(&t, v);
    return v;
  }

  Var constant(Tensor t) { return tape_->leaf(std::move(t)); }
  Tape& tape() { return *tape_; }
  int leaf_id(const Tensor& t) const {
    auto it = bound_.find(&t);
    return it == bound_.end() ? -1 : it->second.id;
  }

 private:
  Tape* tape_;
  std::unordered_map<const Tensor*, Var> bound_;
};

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// f must be deterministic; it is re-evaluated on perturbed copies of x.
double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double eps);

}  // namespace odemm::ad
