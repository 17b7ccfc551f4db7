#include "lcnn/autodiff.hpp"

#include <cmath>

namespace lcnn::ad {

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

Var Tape::push(Matrix value, bool needs_grad, Backward backward) {
  if (!value.all_finite()) {
    throw NumericalError("autodiff: non-finite value in forward pass (node " +
                         std::to_string(nodes_.size()) + ")");
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs_grad, std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Matrix value) { return push(std::move(value), true, nullptr); }
Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

const Matrix& Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.grad.empty()) {
    empty_grad_ = Matrix(n.value.rows(), n.value.cols());
    return empty_grad_;
  }
  return n.grad;
}

Matrix& Tape::grad_mut(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  if (!nodes_[id].needs_grad) return;
  grad_mut(id) += g;
}

void Tape::zero_grad() {
  for (Node& n : nodes_) n.grad = Matrix();
}

void Tape::backward(Var output) {
  const Matrix& v = value(output.id());
  if (v.rows() != 1 || v.cols() != 1) {
    throw ValidationError("Tape::backward: implicit seed needs a 1x1 output");
  }
  backward(output, Matrix(1, 1, 1.0));
}

void Tape::backward(Var output, const Matrix& seed) {
  if (output.tape() != this) throw ValidationError("Tape::backward: foreign Var");
  zero_grad();
  const std::size_t out = output.id();
  const Matrix& v = nodes_[out].value;
  if (seed.rows() != v.rows() || seed.cols() != v.cols()) {
    throw ValidationError("Tape::backward: seed shape mismatch");
  }
  grad_mut(out) = seed;
  for (std::size_t i = out + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || !n.needs_grad || n.grad.empty()) continue;
    n.backward(*this, i);
  }
}

namespace {

bool either(Var a, Var b) {
  return a.tape()->needs_grad(a.id()) || b.tape()->needs_grad(b.id());
}

void same_tape(Var a, Var b) {
  if (a.tape() != b.tape()) throw ValidationError("autodiff: Vars on different tapes");
}

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b);
  Tape& t = *a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(lcnn::matmul(a.value(), b.value()), either(a, b),
                [ia, ib](Tape& tp, std::size_t self) {
                  const Matrix& g = tp.grad(self);
                  if (tp.needs_grad(ia)) tp.accumulate(ia, matmul_nt(g, tp.value(ib)));
                  if (tp.needs_grad(ib)) tp.accumulate(ib, matmul_tn(tp.value(ia), g));
                });
}

Var matmul_nt(Var a, Var b) {
  same_tape(a, b);
  Tape& t = *a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(lcnn::matmul_nt(a.value(), b.value()), either(a, b),
                [ia, ib](Tape& tp, std::size_t self) {
                  const Matrix& g = tp.grad(self);
                  if (tp.needs_grad(ia)) tp.accumulate(ia, lcnn::matmul(g, tp.value(ib)));
                  if (tp.needs_grad(ib)) tp.accumulate(ib, matmul_tn(g, tp.value(ia)));
                });
}

Var add(Var a, Var b) {
  same_tape(a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() + b.value(), either(a, b),
                        [ia, ib](Tape& tp, std::size_t self) {
                          tp.accumulate(ia, tp.grad(self));
                          tp.accumulate(ib, tp.grad(self));
                        });
}

Var sub(Var a, Var b) {
  same_tape(a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() - b.value(), either(a, b),
                        [ia, ib](Tape& tp, std::size_t self) {
                          tp.accumulate(ia, tp.grad(self));
                          tp.accumulate(ib, tp.grad(self) * -1.0);
                        });
}

Var add_row(Var x, Var b) {
  same_tape(x, b);
  const Matrix& xv = x.value();
  const Matrix& bv = b.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw ValidationError("add_row: bias must be 1 x cols(x)");
  }
  Matrix out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv(0, c);
  }
  const std::size_t ix = x.id(), ib = b.id();
  return x.tape()->push(std::move(out), either(x, b), [ix, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    tp.accumulate(ix, g);
    if (tp.needs_grad(ib)) {
      Matrix gb(1, g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
      tp.accumulate(ib, gb);
    }
  });
}

Var hadamard(Var a, Var b) {
  same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows() || av.cols() != bv.cols())
    throw ValidationError("hadamard: shape mismatch");
  Matrix out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= bv.data()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->push(std::move(out), either(a, b), [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.needs_grad(ia)) {
      Matrix ga = g;
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data()[i] *= tp.value(ib).data()[i];
      tp.accumulate(ia, ga);
    }
    if (tp.needs_grad(ib)) {
      Matrix gb = g;
      for (std::size_t i = 0; i < gb.size(); ++i) gb.data()[i] *= tp.value(ia).data()[i];
      tp.accumulate(ib, gb);
    }
  });
}

Var scale(Var a, double s) {
  const std::size_t ia = a.id();
  return a.tape()->push(a.value() * s, a.tape()->needs_grad(ia),
                        [ia, s](Tape& tp, std::size_t self) {
                          tp.accumulate(ia, tp.grad(self) * s);
                        });
}

Var add_scalar(Var a, double s) {
  Matrix out = a.value();
  for (double& v : out.data()) v += s;
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(out), a.tape()->needs_grad(ia),
                        [ia](Tape& tp, std::size_t self) { tp.accumulate(ia, tp.grad(self)); });
}

Var relu(Var a) {
  Matrix out = a.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(out), a.tape()->needs_grad(ia),
                        [ia](Tape& tp, std::size_t self) {
                          Matrix g = tp.grad(self);
                          const Matrix& x = tp.value(ia);
                          for (std::size_t i = 0; i < g.size(); ++i)
                            if (!(x.data()[i] > 0.0)) g.data()[i] = 0.0;
                          tp.accumulate(ia, g);
                        });
}

Var group_sort(Var a) {
  const Matrix& x = a.value();
  Matrix out = x;
  const std::size_t pairs = x.cols() / 2;
  std::vector<unsigned char> swapped(x.rows() * pairs, 0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t p = 0; p < pairs; ++p) {
      if (row[2 * p] < row[2 * p + 1]) {
        std::swap(row[2 * p], row[2 * p + 1]);
        swapped[r * pairs + p] = 1;
      }
    }
  }
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(out), a.tape()->needs_grad(ia),
                        [ia, pairs, swapped = std::move(swapped)](Tape& tp, std::size_t self) {
                          Matrix g = tp.grad(self);
                          for (std::size_t r = 0; r < g.rows(); ++r) {
                            auto row = g.row(r);
                            for (std::size_t p = 0; p < pairs; ++p)
                              if (swapped[r * pairs + p]) std::swap(row[2 * p], row[2 * p + 1]);
                          }
                          tp.accumulate(ia, g);
                        });
}

Var square(Var a) { return hadamard(a, a); }

Var exp(Var a) {
  Matrix out = a.value();
  for (double& v : out.data()) v = std::exp(v);
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(out), a.tape()->needs_grad(ia),
                        [ia](Tape& tp, std::size_t self) {
                          Matrix g = tp.grad(self);
                          const Matrix& y = tp.value(self);
                          for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= y.data()[i];
                          tp.accumulate(ia, g);
                        });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return a.tape()->push(Matrix(1, 1, s), a.tape()->needs_grad(ia),
                        [ia](Tape& tp, std::size_t self) {
                          const Matrix& x = tp.value(ia);
                          tp.accumulate(ia, Matrix(x.rows(), x.cols(), tp.grad(self)(0, 0)));
                        });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var mse_rows(Var pred, const Matrix& target) {
  const Matrix& p = pred.value();
  if (p.rows() != target.rows() || p.cols() != target.cols())
    throw ValidationError("mse_rows: prediction/target shape mismatch");
  Matrix diff = p - target;
  double s = 0.0;
  for (double v : diff.data()) s += v * v;
  const double inv_rows = 1.0 / static_cast<double>(p.rows());
  const std::size_t ip = pred.id();
  return pred.tape()->push(Matrix(1, 1, s * inv_rows), pred.tape()->needs_grad(ip),
                           [ip, inv_rows, diff = std::move(diff)](Tape& tp, std::size_t self) {
                             tp.accumulate(ip, diff * (2.0 * inv_rows * tp.grad(self)(0, 0)));
                           });
}

GradResult grad(const ScalarFn& f, std::span<const Matrix> at) {
  Tape tape;
  std::vector<Var> params;
  params.reserve(at.size());
  for (const Matrix& m : at) params.push_back(tape.variable(m));
  Var out = f(tape, params);
  if (out.value().rows() != 1 || out.value().cols() != 1)
    throw ValidationError("grad: function must return a 1x1 value");
  tape.backward(out);
  GradResult r{out.value()(0, 0), {}};
  r.grads.reserve(params.size());
  for (Var p : params) r.grads.push_back(p.grad());
  return r;
}

}  // namespace lcnn::ad
