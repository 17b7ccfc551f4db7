#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "lcnn/network.hpp"

namespace lcnn {

/// Inputs shared by the Rademacher-complexity and generalization bounds.
struct ERCBoundInputs {
  double B = 1.0;       ///< bound on ‖x‖ over the input domain
  double m = 1.0;       ///< sample count
  std::size_t d = 1;    ///< depth (number of weight matrices)
  std::vector<double> R;  ///< Frobenius-norm bounds, one per layer (length d)
  std::vector<std::pair<std::size_t, std::size_t>> dims;  ///< (m_i, n_i) per layer
  std::size_t d_y = 1;  ///< output dimension
  double L_r = 1.0;     ///< Lipschitz constant of the loss in its first argument
  double M = 1.0;       ///< bound on the loss
  double delta = 0.05;  ///< confidence parameter

  void validate() const;
};

/// B/√m · 2^{d−1} · Π_{i=1..d} R_i for depth-d GroupSort networks with
/// Frobenius-bounded weights.
double erc_groupsort_bound(const ERCBoundInputs& in);

/// B/√m · 2^{d−1} · Π_{i=1..d−1} min(m_i, n_i) for SpectralDense networks.
/// Depends on the layer sizes only.
double erc_lcnn_bound(const ERCBoundInputs& in);

/// empirical + √2·d_y·L_r·B/√m · 2^d · Π_{i=1..d−1} min(m_i, n_i)
///           + 3M·√(log(1/δ) / (2m)).
double generalization_bound(const ERCBoundInputs& in, double empirical_error);

/// B·√(2·log(2)·d) · Π_{i=1..d} R_i / √m for dense networks with
/// 1-Lipschitz activations.
double erc_dense_comparison(const ERCBoundInputs& in);

/// Fills d, R (measured Frobenius norms) and dims from a network.
ERCBoundInputs erc_inputs_from_network(const Network& net, double B, double m);

}  // namespace lcnn
