#include "lcnn/bounds.hpp"

#include <algorithm>
#include <cmath>

namespace lcnn {

void ERCBoundInputs::validate() const {
  if (!(B > 0.0)) throw ValidationError("ERC bound: B must be positive");
  if (!(m > 0.0)) throw ValidationError("ERC bound: m must be positive");
  if (d == 0) throw ValidationError("ERC bound: depth must be at least 1");
  if (!(L_r > 0.0)) throw ValidationError("ERC bound: L_r must be positive");
  if (!(M > 0.0)) throw ValidationError("ERC bound: M must be positive");
  if (d_y == 0) throw ValidationError("ERC bound: d_y must be positive");
  if (!(delta > 0.0 && delta <= 1.0)) throw ValidationError("ERC bound: delta must lie in (0, 1]");
}

namespace {

double frobenius_product(const ERCBoundInputs& in) {
  if (in.R.size() != in.d)
    throw ValidationError("ERC bound: need one Frobenius bound per layer");
  double p = 1.0;
  for (double r : in.R) {
    if (!(r >= 0.0)) throw ValidationError("ERC bound: Frobenius bounds must be non-negative");
    p *= r;
  }
  return p;
}

double size_product(const ERCBoundInputs& in) {
  if (in.dims.size() + 1 < in.d)
    throw ValidationError("ERC bound: need dimensions for the first d-1 layers");
  double p = 1.0;
  for (std::size_t i = 0; i + 1 < in.d; ++i) {
    const auto [rows, cols] = in.dims[i];
    if (rows == 0 || cols == 0) throw ValidationError("ERC bound: layer dimensions must be positive");
    p *= static_cast<double>(std::min(rows, cols));
  }
  return p;
}

}  // namespace

double erc_groupsort_bound(const ERCBoundInputs& in) {
  in.validate();
  return in.B / std::sqrt(in.m) * std::ldexp(1.0, static_cast<int>(in.d) - 1) *
         frobenius_product(in);
}

double erc_lcnn_bound(const ERCBoundInputs& in) {
  in.validate();
  return in.B / std::sqrt(in.m) * std::ldexp(1.0, static_cast<int>(in.d) - 1) * size_product(in);
}

double generalization_bound(const ERCBoundInputs& in, double empirical_error) {
  in.validate();
  const double complexity = std::sqrt(2.0) * static_cast<double>(in.d_y) * in.L_r * in.B /
                            std::sqrt(in.m) * std::ldexp(1.0, static_cast<int>(in.d)) *
                            size_product(in);
  const double confidence = 3.0 * in.M * std::sqrt(std::log(1.0 / in.delta) / (2.0 * in.m));
  return empirical_error + complexity + confidence;
}

double erc_dense_comparison(const ERCBoundInputs& in) {
  in.validate();
  return in.B * std::sqrt(2.0 * std::log(2.0) * static_cast<double>(in.d)) *
         frobenius_product(in) / std::sqrt(in.m);
}

ERCBoundInputs erc_inputs_from_network(const Network& net, double B, double m) {
  net.validate();
  ERCBoundInputs in;
  in.B = B;
  in.m = m;
  in.d = net.depth();
  in.d_y = net.output_dim();
  for (const Layer& l : net.layers) {
    in.R.push_back(frobenius_norm(l.weight));
    in.dims.emplace_back(l.weight.rows(), l.weight.cols());
  }
  return in;
}

}  // namespace lcnn
