#include "lcnn/lattice.hpp"

#include <algorithm>
#include <cmath>

namespace lcnn {

namespace {

// Hidden layers plus final row of one source network, in the padded form used
// by the construction. Biases are unscaled here.
struct Part {
  std::vector<Matrix> W;
  std::vector<Vector> b;
  Vector w_final;
  double b_final = 0.0;
};

Matrix append_zero_row(const Matrix& m) {
  Matrix out(m.rows() + 1, m.cols());
  std::copy(m.data().begin(), m.data().end(), out.data().begin());
  return out;
}

Matrix append_zero_col(const Matrix& m) {
  Matrix out(m.rows(), m.cols() + 1);
  for (std::size_t r = 0; r < m.rows(); ++r)
    std::copy_n(m.row(r).begin(), m.cols(), out.row(r).begin());
  return out;
}

void check_input(const Network& f, const char* name) {
  f.validate();
  const std::string who(name);
  if (f.output_dim() != 1) throw ValidationError(who + " must have a single output");
  if (!f.is_lcnn()) throw ValidationError(who + " must be an LCNN");
  for (std::size_t i = 0; i + 1 < f.depth(); ++i) {
    const double s = spectral_norm_robust(f.layers[i].weight);
    if (std::abs(s - 1.0) > 1e-6)
      throw ValidationError(who + ": hidden layer " + std::to_string(i) + " has sigma_max " +
                            std::to_string(s) + ", expected 1");
  }
  const double n = norm2(f.layers.back().weight.row(0));
  if (std::abs(n - 1.0) > 1e-9)
    throw ValidationError(who + ": final row must have unit norm (see normalize_final_row)");
}

Part prepare(const Network& f, double M) {
  Part p;
  for (std::size_t i = 0; i + 1 < f.depth(); ++i) {
    p.W.push_back(f.layers[i].weight);
    p.b.push_back(f.layers[i].bias);
  }
  const Layer& last = f.layers.back();
  p.w_final.assign(last.weight.row(0).begin(), last.weight.row(0).end());
  p.b_final = last.bias[0];

  if (p.W.empty()) {
    const std::size_t n = f.input_dim();
    Matrix pass(2 * n, n);
    Vector bias(2 * n, 0.0);
    Vector w(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      pass(2 * i, i) = 1.0;
      bias[2 * i + 1] = -M;
      w[2 * i] = p.w_final[i];
    }
    p.W.push_back(std::move(pass));
    p.b.push_back(std::move(bias));
    p.w_final = std::move(w);
  }

  for (std::size_t i = 0; i < p.W.size(); ++i) {
    if (p.W[i].rows() % 2 == 0) continue;
    p.W[i] = append_zero_row(p.W[i]);
    p.b[i].push_back(-M);
    if (i + 1 < p.W.size())
      p.W[i + 1] = append_zero_col(p.W[i + 1]);
    else
      p.w_final.push_back(0.0);
  }
  return p;
}

void deepen(Part& p, std::size_t depth) {
  while (p.W.size() < depth) {
    const std::size_t w = p.W.back().rows();
    p.W.push_back(Matrix::identity(w));
    p.b.push_back(Vector(w, 0.0));
  }
}

Vector scaled_concat(const Vector& a, const Vector& b, double c) {
  Vector out;
  out.reserve(a.size() + b.size());
  for (double v : a) out.push_back(c * v);
  for (double v : b) out.push_back(c * v);
  return out;
}

double padding_constant(const Network& f, const Network& g, const Box& domain) {
  double bound = 1.0;
  for (std::size_t i = 0; i < domain.dim(); ++i)
    bound = std::max({bound, std::abs(domain.lo[i]), std::abs(domain.hi[i])});
  for (const Network* net : {&f, &g})
    for (const LayerBounds& lb : interval_preactivations(*net, domain))
      for (std::size_t i = 0; i < lb.lo.size(); ++i)
        bound = std::max({bound, std::abs(lb.lo[i]), std::abs(lb.hi[i])});
  return 10.0 * bound;
}

LatticeNetwork build(const Network& f, const Network& g, const Box& domain, bool take_max) {
  check_input(f, "f");
  check_input(g, "g");
  domain.validate();
  if (f.input_dim() != g.input_dim())
    throw ValidationError("lattice: f and g have different input dimensions");
  if (domain.dim() != f.input_dim())
    throw ValidationError("lattice: domain dimension does not match the networks");

  const double M = padding_constant(f, g, domain);
  Part pf = prepare(f, M);
  Part pg = prepare(g, M);
  const std::size_t depth = std::max(pf.W.size(), pg.W.size());
  deepen(pf, depth);
  deepen(pg, depth);

  LatticeNetwork out;
  const Matrix first = vstack(pf.W[0], pg.W[0]);
  out.c = 1.0 / spectral_norm_robust(first);
  const double c = out.c;

  out.net.layers.push_back(
      {LayerKind::SpectralDense, first * c, scaled_concat(pf.b[0], pg.b[0], c)});
  for (std::size_t i = 1; i < depth; ++i)
    out.net.layers.push_back({LayerKind::SpectralDense, block_diag(pf.W[i], pg.W[i]),
                              scaled_concat(pf.b[i], pg.b[i], c)});
  out.net.layers.push_back(
      {LayerKind::SpectralDense,
       block_diag(Matrix::row_vector(pf.w_final), Matrix::row_vector(pg.w_final)),
       {c * pf.b_final, c * pg.b_final}});
  out.net.layers.push_back(
      {LayerKind::LinearFree, take_max ? Matrix{{1.0, 0.0}} : Matrix{{0.0, 1.0}}, {0.0}});
  out.net.validate();
  return out;
}

}  // namespace

LatticeNetwork lattice_max(const Network& f, const Network& g, const Box& domain) {
  return build(f, g, domain, true);
}

LatticeNetwork lattice_min(const Network& f, const Network& g, const Box& domain) {
  return build(f, g, domain, false);
}

Network normalize_final_row(const Network& f) {
  f.validate();
  if (f.output_dim() != 1) throw ValidationError("normalize_final_row: need a single output");
  Network out = f;
  Layer& last = out.layers.back();
  const double n = norm2(last.weight.row(0));
  if (!(n > 0.0)) throw ValidationError("normalize_final_row: final row is zero");
  last.weight *= 1.0 / n;
  return out;
}

}  // namespace lcnn
