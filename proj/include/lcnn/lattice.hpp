#pragma once

#include "lcnn/network.hpp"

namespace lcnn {

/// A SpectralDense network h together with the scale c such that
/// c⁻¹·h(x) equals the pointwise max (or min) of the two source networks.
struct LatticeNetwork {
  Network net;
  double c = 1.0;
};

/// Builds h from two real-valued LCNNs f and g on the same input dimension.
///
/// Both inputs must have SpectralDense hidden layers with σ_max = 1 and a
/// single-row final linear layer of unit Euclidean norm. Shorter networks
/// are padded with identity layers; odd widths get an extra unit pinned at
/// −c·M, where M is ten times the largest interval bound of any
/// pre-activation over the domain. A network without hidden layers first
/// gets a pass-through layer that pairs each input with a −M unit.
///
/// The first layer of h is c·[W₁ᶠ; W₁ᵍ] with c = 1/σ_max of the stack, the
/// remaining hidden layers are block-diagonal, every bias is scaled by c,
/// and the final-row pair is sorted by one more SpectralDense layer. The
/// last layer is the LinearFree selector [1, 0] (max) or [0, 1] (min).
///
/// The identity holds on the given domain box.
LatticeNetwork lattice_max(const Network& f, const Network& g, const Box& domain);
LatticeNetwork lattice_min(const Network& f, const Network& g, const Box& domain);

/// Rescales the final row of a single-output network to unit norm, which
/// turns any single-output LCNN into a valid lattice input.
Network normalize_final_row(const Network& f);

}  // namespace lcnn
