#include "lcnn/network.hpp"

#include <algorithm>
#include <cmath>

namespace lcnn {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::SpectralDense: return "SpectralDense";
    case LayerKind::DenseReLU: return "DenseReLU";
    case LayerKind::LinearClipped: return "LinearClipped";
    case LayerKind::LinearFree: return "LinearFree";
  }
  return "?";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (LayerKind k : {LayerKind::SpectralDense, LayerKind::DenseReLU,
                      LayerKind::LinearClipped, LayerKind::LinearFree}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("unknown layer kind '" + std::string(name) + "'");
}

namespace {

bool is_linear(LayerKind k) {
  return k == LayerKind::LinearClipped || k == LayerKind::LinearFree;
}

void apply_activation_row(LayerKind kind, std::span<double> z) {
  switch (kind) {
    case LayerKind::SpectralDense:
      for (std::size_t p = 0; p + 1 < z.size(); p += 2)
        if (z[p] < z[p + 1]) std::swap(z[p], z[p + 1]);
      break;
    case LayerKind::DenseReLU:
      for (double& v : z) v = v > 0.0 ? v : 0.0;
      break;
    default:
      break;
  }
}

}  // namespace

std::size_t Network::input_dim() const {
  return layers.empty() ? 0 : layers.front().weight.cols();
}

std::size_t Network::output_dim() const {
  return layers.empty() ? 0 : layers.back().weight.rows();
}

std::vector<LayerSpec> Network::specs() const {
  std::vector<LayerSpec> s;
  s.reserve(layers.size());
  for (const Layer& l : layers) s.push_back(l.spec());
  return s;
}

void Network::validate() const {
  if (layers.empty()) throw ValidationError("network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (l.weight.rows() == 0 || l.weight.cols() == 0)
      throw ValidationError("layer " + std::to_string(i) + " has an empty weight matrix");
    if (l.bias.size() != l.weight.rows())
      throw ValidationError("layer " + std::to_string(i) + " bias length differs from out_dim");
    if (i > 0 && layers[i - 1].weight.rows() != l.weight.cols())
      throw ValidationError("layer " + std::to_string(i) + " input does not chain");
    if (!l.weight.all_finite() ||
        !std::all_of(l.bias.begin(), l.bias.end(), [](double v) { return std::isfinite(v); }))
      throw ValidationError("layer " + std::to_string(i) + " has non-finite parameters");
  }
}

bool Network::is_lcnn() const {
  if (layers.empty() || !is_linear(layers.back().kind)) return false;
  return std::all_of(layers.begin(), layers.end() - 1,
                     [](const Layer& l) { return l.kind == LayerKind::SpectralDense; });
}

bool Network::is_dense_relu() const {
  if (layers.empty() || !is_linear(layers.back().kind)) return false;
  return std::all_of(layers.begin(), layers.end() - 1,
                     [](const Layer& l) { return l.kind == LayerKind::DenseReLU; });
}

Vector Box::center() const {
  Vector c(lo.size());
  for (std::size_t i = 0; i < lo.size(); ++i) c[i] = 0.5 * (lo[i] + hi[i]);
  return c;
}

void Box::validate() const {
  if (lo.size() != hi.size() || lo.empty()) throw ValidationError("box: bad dimensions");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(std::isfinite(lo[i]) && std::isfinite(hi[i]) && lo[i] <= hi[i]))
      throw ValidationError("box: bounds must be finite with lo <= hi");
}

Vector group_sort(std::span<const double> x) {
  Vector y(x.begin(), x.end());
  apply_activation_row(LayerKind::SpectralDense, y);
  return y;
}

Vector forward(const Network& net, std::span<const double> x) {
  if (x.size() != net.input_dim())
    throw ValidationError("forward: input has " + std::to_string(x.size()) +
                          " entries, network expects " + std::to_string(net.input_dim()));
  Vector a(x.begin(), x.end());
  for (const Layer& l : net.layers) {
    Vector z = matvec(l.weight, a);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += l.bias[i];
    apply_activation_row(l.kind, z);
    a = std::move(z);
  }
  return a;
}

Matrix forward_batch(const Network& net, const Matrix& x) {
  if (x.cols() != net.input_dim()) throw ValidationError("forward_batch: input width mismatch");
  Matrix a = x;
  for (const Layer& l : net.layers) {
    Matrix z = matmul_nt(a, l.weight);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto row = z.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += l.bias[c];
      apply_activation_row(l.kind, row);
    }
    a = std::move(z);
  }
  return a;
}

NetworkVars record_parameters(ad::Tape& tape, const Network& net, bool trainable) {
  NetworkVars v;
  for (const Layer& l : net.layers) {
    Matrix b = Matrix::row_vector(l.bias);
    if (trainable) {
      v.weights.push_back(tape.variable(l.weight));
      v.biases.push_back(tape.variable(std::move(b)));
    } else {
      v.weights.push_back(tape.constant(l.weight));
      v.biases.push_back(tape.constant(std::move(b)));
    }
  }
  return v;
}

ad::Var forward(const Network& net, const NetworkVars& vars, ad::Var x) {
  ad::Var a = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    a = ad::add_row(ad::matmul_nt(a, vars.weights[i]), vars.biases[i]);
    switch (net.layers[i].kind) {
      case LayerKind::SpectralDense: a = ad::group_sort(a); break;
      case LayerKind::DenseReLU: a = ad::relu(a); break;
      default: break;
    }
  }
  return a;
}

Matrix jacobian(const Network& net, std::span<const double> x) {
  if (x.size() != net.input_dim()) throw ValidationError("jacobian: input dimension mismatch");
  ad::Tape tape;
  NetworkVars vars = record_parameters(tape, net, false);
  ad::Var in = tape.variable(Matrix::row_vector(x));
  ad::Var out = forward(net, vars, in);
  const std::size_t m = net.output_dim();
  Matrix j(m, x.size());
  for (std::size_t r = 0; r < m; ++r) {
    Matrix seed(1, m);
    seed(0, r) = 1.0;
    tape.backward(out, seed);
    const Matrix& g = in.grad();
    for (std::size_t c = 0; c < x.size(); ++c) j(r, c) = g(0, c);
  }
  return j;
}

std::pair<Vector, Matrix> forward_with_jacobian(const Network& net, std::span<const double> x) {
  if (x.size() != net.input_dim())
    throw ValidationError("forward_with_jacobian: input dimension mismatch");
  Vector a(x.begin(), x.end());
  Matrix j = Matrix::identity(x.size());
  for (const Layer& l : net.layers) {
    Vector z = matvec(l.weight, a);
    for (std::size_t r = 0; r < z.size(); ++r) z[r] += l.bias[r];
    j = matmul(l.weight, j);
    if (l.kind == LayerKind::SpectralDense) {
      for (std::size_t p = 0; p + 1 < z.size(); p += 2) {
        if (z[p] < z[p + 1]) {
          std::swap(z[p], z[p + 1]);
          std::swap_ranges(j.row(p).begin(), j.row(p).end(), j.row(p + 1).begin());
        }
      }
    } else if (l.kind == LayerKind::DenseReLU) {
      for (std::size_t r = 0; r < z.size(); ++r) {
        if (z[r] <= 0.0) {
          z[r] = 0.0;
          std::fill(j.row(r).begin(), j.row(r).end(), 0.0);
        }
      }
    }
    a = std::move(z);
  }
  return {std::move(a), std::move(j)};
}

namespace {

Layer random_layer(LayerKind kind, std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-a, a);
  Layer l{kind, Matrix(out, in), Vector(out, 0.0)};
  for (double& w : l.weight.data()) w = u(rng);
  return l;
}

}  // namespace

Network make_lcnn(std::size_t in_dim, std::span<const std::size_t> hidden, std::size_t out_dim,
                  std::mt19937_64& rng, double clip) {
  Network net;
  net.clip = clip;
  std::size_t prev = in_dim;
  for (std::size_t h : hidden) {
    net.layers.push_back(random_layer(LayerKind::SpectralDense, prev, h, rng));
    prev = h;
  }
  net.layers.push_back(random_layer(LayerKind::LinearClipped, prev, out_dim, rng));
  project_spectral_inplace(net);
  return net;
}

Network make_dense_relu(std::size_t in_dim, std::span<const std::size_t> hidden,
                        std::size_t out_dim, std::mt19937_64& rng) {
  Network net;
  std::size_t prev = in_dim;
  for (std::size_t h : hidden) {
    net.layers.push_back(random_layer(LayerKind::DenseReLU, prev, h, rng));
    prev = h;
  }
  net.layers.push_back(random_layer(LayerKind::LinearFree, prev, out_dim, rng));
  return net;
}

void project_spectral_inplace(Network& net, const PowerIterationOptions& opts) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Layer& l = net.layers[i];
    if (l.kind == LayerKind::SpectralDense) {
      const bool zero = std::all_of(l.weight.data().begin(), l.weight.data().end(),
                                    [](double v) { return v == 0.0; });
      if (zero)
        throw ValidationError("project_spectral: SpectralDense layer " + std::to_string(i) +
                              " has an all-zero weight matrix");
      l.weight *= 1.0 / spectral_norm_robust(l.weight, opts);
    } else if (l.kind == LayerKind::LinearClipped) {
      for (double& w : l.weight.data()) w = std::clamp(w, -net.clip, net.clip);
    }
  }
}

Network project_spectral(const Network& net, const PowerIterationOptions& opts) {
  Network out = net;
  project_spectral_inplace(out, opts);
  return out;
}

namespace {

double sigma_or_zero(const Matrix& w) {
  const bool zero =
      std::all_of(w.data().begin(), w.data().end(), [](double v) { return v == 0.0; });
  return zero ? 0.0 : spectral_norm_robust(w, {1e-12, 5000});
}

}  // namespace

double spectral_product_bound(const Network& net) {
  double p = 1.0;
  for (const Layer& l : net.layers) p *= sigma_or_zero(l.weight);
  return p;
}

double lipschitz_upper_bound(const Network& net) {
  if (net.is_lcnn()) {
    bool projected = true;
    for (std::size_t i = 0; i + 1 < net.layers.size(); ++i)
      projected = projected && std::abs(sigma_or_zero(net.layers[i].weight) - 1.0) <= 1e-6;
    if (projected) return sigma_or_zero(net.layers.back().weight);
  }
  return spectral_product_bound(net);
}

double empirical_lipschitz_lower(const Network& net, const Box& domain, std::size_t samples,
                                 std::uint64_t seed) {
  domain.validate();
  if (domain.dim() != net.input_dim())
    throw ValidationError("empirical_lipschitz_lower: box dimension mismatch");
  auto jac_norm = [&](const Vector& x) {
    const Matrix j = jacobian(net, x);
    return singular_values(j).front();
  };
  double best = jac_norm(domain.center());
  std::mt19937_64 rng(seed);
  std::vector<std::uniform_real_distribution<double>> dists;
  for (std::size_t i = 0; i < domain.dim(); ++i) dists.emplace_back(domain.lo[i], domain.hi[i]);
  Vector x(domain.dim());
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = dists[i](rng);
    best = std::max(best, jac_norm(x));
  }
  return best;
}

std::vector<LayerBounds> interval_preactivations(const Network& net, const Box& domain) {
  domain.validate();
  if (domain.dim() != net.input_dim())
    throw ValidationError("interval_preactivations: box dimension mismatch");
  std::vector<LayerBounds> out;
  Vector lo = domain.lo, hi = domain.hi;
  for (const Layer& l : net.layers) {
    LayerBounds b{Vector(l.weight.rows()), Vector(l.weight.rows())};
    for (std::size_t r = 0; r < l.weight.rows(); ++r) {
      double zl = l.bias[r], zh = l.bias[r];
      const auto w = l.weight.row(r);
      for (std::size_t c = 0; c < w.size(); ++c) {
        if (w[c] >= 0) {
          zl += w[c] * lo[c];
          zh += w[c] * hi[c];
        } else {
          zl += w[c] * hi[c];
          zh += w[c] * lo[c];
        }
      }
      b.lo[r] = zl;
      b.hi[r] = zh;
    }
    lo = b.lo;
    hi = b.hi;
    if (l.kind == LayerKind::DenseReLU) {
      for (std::size_t r = 0; r < lo.size(); ++r) {
        lo[r] = std::max(lo[r], 0.0);
        hi[r] = std::max(hi[r], 0.0);
      }
    } else if (l.kind == LayerKind::SpectralDense) {
      for (std::size_t p = 0; p + 1 < lo.size(); p += 2) {
        const double l1 = lo[p], l2 = lo[p + 1], h1 = hi[p], h2 = hi[p + 1];
        lo[p] = std::max(l1, l2);
        hi[p] = std::max(h1, h2);
        lo[p + 1] = std::min(l1, l2);
        hi[p + 1] = std::min(h1, h2);
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace lcnn
