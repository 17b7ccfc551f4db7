#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "lcnn/network.hpp"

namespace lcnn {

enum class CertificateMethod { SpectralProduct, FinalLayer, BranchAndBound };
std::string_view to_string(CertificateMethod m);

struct LipschitzCertificate {
  double upper = 0.0;  ///< sound upper bound on the Lipschitz constant over the domain
  double lower = 0.0;  ///< largest sampled Jacobian norm (a valid lower bound)
  CertificateMethod method = CertificateMethod::SpectralProduct;
  bool tight = false;  ///< upper − lower ≤ eps was reached within budget
  std::size_t boxes = 0;  ///< sub-boxes evaluated

  double gap() const { return upper - lower; }
};

struct BabOptions {
  double eps = 1e-6;
  std::size_t max_boxes = 20000;
  /// Boxes with at most this many unstable ReLUs are bounded by enumerating
  /// every activation pattern; others use the interval Jacobian enclosure.
  std::size_t enumerate_max_unstable = 10;
};

/// Branch and bound over input sub-boxes for networks made of DenseReLU and
/// linear layers. Per box, interval propagation fixes the state of stable
/// ReLUs; the remaining ones are either enumerated or relaxed to [0, 1] in an
/// interval Jacobian whose norm is bounded by ‖mid‖₂ + ‖rad‖₂. Boxes are
/// split best-first along their widest dimension. The result is always a
/// sound upper bound; `tight` reports whether the gap closed to eps.
LipschitzCertificate bab_lipschitz(const Network& net, const Box& domain,
                                   const BabOptions& opts = {});

/// Certificate for an LCNN: σ_max of the final matrix when the hidden layers
/// are projected, otherwise the spectral product. The lower bound comes from
/// sampled Jacobians over the domain.
LipschitzCertificate certify_lcnn(const Network& net, const Box& domain,
                                  std::size_t samples = 1000, std::uint64_t seed = 0);

}  // namespace lcnn
