#include "lcnn/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>

namespace lcnn {

std::string_view to_string(CertificateMethod m) {
  switch (m) {
    case CertificateMethod::SpectralProduct: return "spectral_product";
    case CertificateMethod::FinalLayer: return "final_layer";
    case CertificateMethod::BranchAndBound: return "bab";
  }
  return "?";
}

namespace {

enum class Unit : unsigned char { Active, Inactive, Unstable };

double sigma_max(const Matrix& m) {
  for (double v : m.data())
    if (v != 0.0) return singular_values(m).front();
  return 0.0;
}

bool is_relu_or_linear(const Network& net) {
  for (std::size_t i = 0; i < net.depth(); ++i) {
    const LayerKind k = net.layers[i].kind;
    const bool linear = k == LayerKind::LinearFree || k == LayerKind::LinearClipped;
    if (i + 1 == net.depth() ? !linear : !(linear || k == LayerKind::DenseReLU)) return false;
  }
  return true;
}

// Row-scales J by the activation derivative and applies the next weight.
Matrix pattern_jacobian(const Network& net, const std::vector<std::vector<double>>& d) {
  Matrix j = net.layers[0].weight;
  for (std::size_t i = 0; i + 1 < net.depth(); ++i) {
    for (std::size_t r = 0; r < j.rows(); ++r)
      for (double& v : j.row(r)) v *= d[i][r];
    j = matmul(net.layers[i + 1].weight, j);
  }
  return j;
}

struct BoxResult {
  Box box;
  double upper = 0.0;
  double attained = 0.0;  // Jacobian norm at a point of the box
  std::size_t unstable = 0;
  std::size_t order = 0;  // creation index, for deterministic tie-breaking
};

struct ByUpper {
  bool operator()(const BoxResult& a, const BoxResult& b) const {
    if (a.upper != b.upper) return a.upper < b.upper;
    return a.order > b.order;
  }
};

class Bounder {
 public:
  Bounder(const Network& net, const BabOptions& opts) : net_(net), opts_(opts) {}

  BoxResult bound(const Box& box) const {
    const auto pre = interval_preactivations(net_, box);
    std::vector<std::vector<Unit>> units(net_.depth() - 1);
    std::size_t unstable = 0;
    for (std::size_t i = 0; i + 1 < net_.depth(); ++i) {
      const bool relu = net_.layers[i].kind == LayerKind::DenseReLU;
      units[i].resize(pre[i].lo.size());
      for (std::size_t r = 0; r < units[i].size(); ++r) {
        Unit u = Unit::Active;
        if (relu) {
          if (pre[i].hi[r] <= 0.0)
            u = Unit::Inactive;
          else if (pre[i].lo[r] < 0.0)
            u = Unit::Unstable;
        }
        units[i][r] = u;
        unstable += u == Unit::Unstable;
      }
    }
    BoxResult res{box, 0.0, 0.0, unstable, 0};
    res.attained = point_norm(box.center());
    if (unstable <= opts_.enumerate_max_unstable) {
      std::vector<std::vector<double>> best_d;
      res.upper = enumerate(units, unstable, best_d);
      if (unstable > 0 && res.attained < res.upper) {
        if (const auto x = witness(box, units, best_d))
          res.attained = std::max(res.attained, point_norm(*x));
      }
    } else {
      res.upper = enclosure(units);
    }
    return res;
  }

  /// σ_max of the Jacobian at x (the pattern realised there).
  double point_norm(std::span<const double> x) const {
    std::vector<std::vector<double>> d(net_.depth() - 1);
    Vector a(x.begin(), x.end());
    for (std::size_t i = 0; i + 1 < net_.depth(); ++i) {
      const Layer& l = net_.layers[i];
      Vector z = matvec(l.weight, a);
      d[i].resize(z.size());
      for (std::size_t r = 0; r < z.size(); ++r) {
        z[r] += l.bias[r];
        const bool on = l.kind != LayerKind::DenseReLU || z[r] > 0.0;
        d[i][r] = on ? 1.0 : 0.0;
        if (!on) z[r] = 0.0;
      }
      a = std::move(z);
    }
    return sigma_max(pattern_jacobian(net_, d));
  }

 private:
  double enumerate(const std::vector<std::vector<Unit>>& units, std::size_t unstable,
                   std::vector<std::vector<double>>& best_d) const {
    std::vector<std::vector<double>> d(units.size());
    std::vector<std::pair<std::size_t, std::size_t>> free;
    for (std::size_t i = 0; i < units.size(); ++i) {
      d[i].resize(units[i].size());
      for (std::size_t r = 0; r < units[i].size(); ++r) {
        d[i][r] = units[i][r] == Unit::Inactive ? 0.0 : 1.0;
        if (units[i][r] == Unit::Unstable) free.emplace_back(i, r);
      }
    }
    double best = 0.0;
    const std::uint64_t patterns = std::uint64_t{1} << unstable;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
      for (std::size_t k = 0; k < free.size(); ++k)
        d[free[k].first][free[k].second] = (mask >> k) & 1U ? 1.0 : 0.0;
      const double v = sigma_max(pattern_jacobian(net_, d));
      if (v > best || best_d.empty()) {
        best = v;
        best_d = d;
      }
    }
    return best;
  }

  // Looks for a point of the box where every unstable unit takes the sign
  // given by pattern d. With the pattern fixed each pre-activation is affine
  // in x, so this maximises the smallest normalised margin by projected
  // subgradient ascent. Returns a point with positive margin, if found.
  std::optional<Vector> witness(const Box& box, const std::vector<std::vector<Unit>>& units,
                                const std::vector<std::vector<double>>& d) const {
    const std::size_t n = box.dim();
    std::vector<Vector> rows;
    std::vector<double> offsets;
    Matrix A = net_.layers[0].weight;
    Vector c = net_.layers[0].bias;
    for (std::size_t i = 0; i + 1 < net_.depth(); ++i) {
      for (std::size_t r = 0; r < A.rows(); ++r) {
        if (units[i][r] == Unit::Unstable) {
          const double sign = d[i][r] > 0.0 ? 1.0 : -1.0;
          Vector a(A.row(r).begin(), A.row(r).end());
          double off = sign * c[r];
          const double len = norm2(a);
          if (len == 0.0) {
            if (off <= 0.0) return std::nullopt;
            continue;
          }
          for (double& v : a) v *= sign / len;
          rows.push_back(std::move(a));
          offsets.push_back(off / len);
        }
        for (double& v : A.row(r)) v *= d[i][r];
        c[r] *= d[i][r];
      }
      const Layer& next = net_.layers[i + 1];
      A = matmul(next.weight, A);
      Vector nc = matvec(next.weight, c);
      for (std::size_t r = 0; r < nc.size(); ++r) nc[r] += next.bias[r];
      c = std::move(nc);
    }
    if (rows.empty()) return std::nullopt;

    double diameter = 0.0;
    for (std::size_t k = 0; k < n; ++k) diameter = std::max(diameter, box.hi[k] - box.lo[k]);
    Vector x = box.center(), best_x = x;
    double best_margin = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < 400; ++it) {
      std::size_t worst = 0;
      double margin = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < rows.size(); ++k) {
        double m = offsets[k];
        for (std::size_t j = 0; j < n; ++j) m += rows[k][j] * x[j];
        if (m < margin) {
          margin = m;
          worst = k;
        }
      }
      if (margin > best_margin) {
        best_margin = margin;
        best_x = x;
      }
      const double step = 0.25 * diameter / std::sqrt(1.0 + it);
      for (std::size_t j = 0; j < n; ++j)
        x[j] = std::clamp(x[j] + step * rows[worst][j], box.lo[j], box.hi[j]);
    }
    if (best_margin > 1e-12 * std::max(1.0, diameter)) return best_x;
    return std::nullopt;
  }

  double enclosure(const std::vector<std::vector<Unit>>& units) const {
    Matrix mid = net_.layers[0].weight;
    Matrix rad(mid.rows(), mid.cols());
    for (std::size_t i = 0; i + 1 < net_.depth(); ++i) {
      for (std::size_t r = 0; r < mid.rows(); ++r) {
        auto m = mid.row(r);
        auto q = rad.row(r);
        switch (units[i][r]) {
          case Unit::Active: break;
          case Unit::Inactive:
            std::fill(m.begin(), m.end(), 0.0);
            std::fill(q.begin(), q.end(), 0.0);
            break;
          case Unit::Unstable:
            for (std::size_t c = 0; c < m.size(); ++c) {
              q[c] = 0.5 * q[c] + 0.5 * (std::abs(m[c]) + q[c]);
              m[c] *= 0.5;
            }
            break;
        }
      }
      const Matrix& w = net_.layers[i + 1].weight;
      Matrix abs_w = w;
      for (double& v : abs_w.data()) v = std::abs(v);
      mid = matmul(w, mid);
      rad = matmul(abs_w, rad);
    }
    return sigma_max(mid) + sigma_max(rad);
  }

  const Network& net_;
  const BabOptions& opts_;
};

std::pair<Box, Box> split_widest(const Box& b) {
  std::size_t k = 0;
  for (std::size_t i = 1; i < b.dim(); ++i)
    if (b.hi[i] - b.lo[i] > b.hi[k] - b.lo[k]) k = i;
  const double m = 0.5 * (b.lo[k] + b.hi[k]);
  Box left = b, right = b;
  left.hi[k] = m;
  right.lo[k] = m;
  return {std::move(left), std::move(right)};
}

}  // namespace

LipschitzCertificate bab_lipschitz(const Network& net, const Box& domain, const BabOptions& opts) {
  net.validate();
  domain.validate();
  if (domain.dim() != net.input_dim())
    throw ValidationError("bab_lipschitz: domain dimension does not match the network");
  if (!is_relu_or_linear(net))
    throw ValidationError("bab_lipschitz: network must consist of DenseReLU and linear layers");
  if (!(opts.eps >= 0.0)) throw ValidationError("bab_lipschitz: eps must be non-negative");
  if (opts.enumerate_max_unstable > 24)
    throw ValidationError("bab_lipschitz: enumeration threshold above 24 units");

  const Bounder bounder(net, opts);
  LipschitzCertificate cert;
  cert.method = CertificateMethod::BranchAndBound;

  std::priority_queue<BoxResult, std::vector<BoxResult>, ByUpper> queue;
  std::size_t order = 0;
  auto push = [&](const Box& b) {
    BoxResult r = bounder.bound(b);
    r.order = order++;
    cert.lower = std::max(cert.lower, r.attained);
    queue.push(std::move(r));
    ++cert.boxes;
  };
  push(domain);

  double closed = 0.0;  // largest bound among boxes with no unstable unit
  while (true) {
    if (queue.empty()) {
      cert.upper = closed;
      cert.tight = true;
      break;
    }
    const BoxResult& top = queue.top();
    const double upper = std::max(top.upper, closed);
    if (upper - cert.lower <= opts.eps) {
      cert.upper = upper;
      cert.tight = true;
      break;
    }
    if (top.unstable == 0) {
      // A single pattern on the whole box: the bound is attained there.
      closed = std::max(closed, top.upper);
      cert.lower = std::max(cert.lower, top.upper);
      queue.pop();
      continue;
    }
    if (cert.boxes + 2 > opts.max_boxes) {
      cert.upper = upper;
      cert.tight = false;
      break;
    }
    const Box box = top.box;
    queue.pop();
    auto [left, right] = split_widest(box);
    push(left);
    push(right);
  }
  return cert;
}

LipschitzCertificate certify_lcnn(const Network& net, const Box& domain, std::size_t samples,
                                  std::uint64_t seed) {
  net.validate();
  LipschitzCertificate cert;
  bool projected = net.is_lcnn();
  for (std::size_t i = 0; projected && i + 1 < net.depth(); ++i)
    projected = std::abs(sigma_max(net.layers[i].weight) - 1.0) <= 1e-6;
  cert.method = projected ? CertificateMethod::FinalLayer : CertificateMethod::SpectralProduct;
  cert.upper = lipschitz_upper_bound(net);
  cert.lower = empirical_lipschitz_lower(net, domain, samples, seed);
  cert.boxes = 1;
  cert.tight = cert.gap() <= 1e-6;
  return cert;
}

}  // namespace lcnn
