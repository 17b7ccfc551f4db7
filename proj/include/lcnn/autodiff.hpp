#pragma once

#include <functional>
#include <span>
#include <vector>

#include "lcnn/matrix.hpp"

namespace lcnn::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records matrix-valued primitives in creation order. Creation order is a
/// topological order, so backward() walks the node list once from the output
/// back to the first node.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var variable(Matrix value);
  Var constant(Matrix value);

  /// Seeds d(output)/d(output) = 1 for a 1x1 output.
  void backward(Var output);
  void backward(Var output, const Matrix& seed);
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }
  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  /// Gradient of the last backward() seed w.r.t. node id. Zero matrix if the
  /// node did not influence the output.
  const Matrix& grad(std::size_t id) const;

  // Used by primitive implementations.
  Var push(Matrix value, bool needs_grad, Backward backward);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  void accumulate(std::size_t id, const Matrix& g);
  Matrix& grad_mut(std::size_t id);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
  mutable Matrix empty_grad_;
};

Var matmul(Var a, Var b);
/// a·bᵀ; used for batched affine layers with weights stored out×in.
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// x (B×n) plus a broadcast row bias b (1×n).
Var add_row(Var x, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var relu(Var a);
/// GroupSort (group size 2) applied to each row. Ties keep their order, so
/// the gradient of max goes to the first element of an equal pair.
Var group_sort(Var a);
Var square(Var a);
Var exp(Var a);
Var sum(Var a);
Var mean(Var a);
/// Mean over rows of the squared row error ‖a_i − target_i‖².
Var mse_rows(Var pred, const Matrix& target);

/// Evaluates f at the given parameter values and returns its gradient with
/// respect to each. f must return a 1x1 Var built from recorded primitives.
/// Throws NumericalError if the forward value is not finite.
struct GradResult {
  double value;
  std::vector<Matrix> grads;
};
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;
GradResult grad(const ScalarFn& f, std::span<const Matrix> at);

}  // namespace lcnn::ad
