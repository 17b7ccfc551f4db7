#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lcnn/autodiff.hpp"
#include "lcnn/matrix.hpp"

namespace lcnn {

enum class LayerKind {
  SpectralDense,  ///< ‖W‖₂ = 1, GroupSort activation
  DenseReLU,      ///< unconstrained W, component-wise ReLU
  LinearClipped,  ///< affine, entries of W clipped to [−c_max, c_max]
  LinearFree,     ///< affine, unconstrained
};

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

struct LayerSpec {
  LayerKind kind;
  std::size_t in_dim;
  std::size_t out_dim;
};

/// One affine map W·x + b (W is out×in) followed by the kind's activation.
struct Layer {
  LayerKind kind = LayerKind::LinearFree;
  Matrix weight;
  Vector bias;

  LayerSpec spec() const { return {kind, weight.cols(), weight.rows()}; }
  friend bool operator==(const Layer&, const Layer&) = default;
};

/// An ordered stack of layers. Houses the W_i, b_i of every network kind used
/// here: LCNNs (SpectralDense hidden layers + clipped final map) and dense
/// ReLU baselines.
struct Network {
  std::vector<Layer> layers;
  double clip = 1.0;  ///< c_max for LinearClipped layers

  std::size_t depth() const { return layers.size(); }
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::vector<LayerSpec> specs() const;

  /// Checks dimension chaining, bias lengths and finiteness.
  void validate() const;

  /// True when every layer but the last is SpectralDense and the last one is
  /// a linear map.
  bool is_lcnn() const;
  /// True when every layer but the last is DenseReLU and the last is linear.
  bool is_dense_relu() const;

  friend bool operator==(const Network&, const Network&) = default;
};

/// Axis-aligned box [lo, hi] in input space.
struct Box {
  Vector lo;
  Vector hi;

  std::size_t dim() const { return lo.size(); }
  Vector center() const;
  void validate() const;
};

/// GroupSort with group size 2: each adjacent disjoint pair is reordered as
/// (max, min); an odd trailing entry passes through.
Vector group_sort(std::span<const double> x);

Vector forward(const Network& net, std::span<const double> x);
/// Rows of x are samples.
Matrix forward_batch(const Network& net, const Matrix& x);

/// Trainable view of a Network on a tape.
struct NetworkVars {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;  ///< each 1×out
};
NetworkVars record_parameters(ad::Tape& tape, const Network& net, bool trainable = true);
ad::Var forward(const Network& net, const NetworkVars& vars, ad::Var x);

/// Jacobian d forward / d x (output_dim × input_dim) via reverse mode.
Matrix jacobian(const Network& net, std::span<const double> x);

/// Output and Jacobian in one forward sweep (forward-mode; the Jacobian is
/// carried alongside the activations). Matches jacobian() away from ties.
std::pair<Vector, Matrix> forward_with_jacobian(const Network& net, std::span<const double> x);

/// Weight initialisation: U(−1/√fan_in, 1/√fan_in), zero bias. LCNNs are
/// projected immediately so the hidden layers start with σ_max = 1.
Network make_lcnn(std::size_t in_dim, std::span<const std::size_t> hidden,
                  std::size_t out_dim, std::mt19937_64& rng, double clip = 1.0);
Network make_dense_relu(std::size_t in_dim, std::span<const std::size_t> hidden,
                        std::size_t out_dim, std::mt19937_64& rng);

/// Divides every SpectralDense weight by its largest singular value and clamps
/// LinearClipped entries to [−clip, clip]. Other layers are untouched.
Network project_spectral(const Network& net,
                         const PowerIterationOptions& opts = {});
void project_spectral_inplace(Network& net, const PowerIterationOptions& opts = {});

/// Π σ_max(W_i) over all layers. Sound for every kind used here because
/// GroupSort and ReLU are 1-Lipschitz.
double spectral_product_bound(const Network& net);

/// For a projected LCNN (hidden σ_max within 1e-6 of one) this is σ_max of
/// the final matrix; otherwise falls back to spectral_product_bound.
double lipschitz_upper_bound(const Network& net);

/// max over sampled x of σ_max(J(x)). Always a lower bound on the Lipschitz
/// constant over the box. The box centre and corners are included when the
/// dimension allows.
double empirical_lipschitz_lower(const Network& net, const Box& domain, std::size_t samples,
                                 std::uint64_t seed = 0);

/// Pre-activation interval bounds per layer over the box (interval
/// arithmetic, sound but not tight).
struct LayerBounds {
  Vector lo;
  Vector hi;
};
std::vector<LayerBounds> interval_preactivations(const Network& net, const Box& domain);

}  // namespace lcnn
