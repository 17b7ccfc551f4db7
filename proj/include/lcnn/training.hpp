#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "lcnn/matrix.hpp"
#include "lcnn/network.hpp"

namespace lcnn {

/// Input/output pairs, one sample per row. For the reactor these are
/// (x₀, u) ∈ ℝ⁴ → x(Δ) ∈ ℝ².
struct LabeledDataset {
  Matrix inputs;
  Matrix outputs;

  std::size_t size() const { return inputs.rows(); }
  void validate() const;
  LabeledDataset subset(std::span<const std::size_t> rows) const;
};

/// Per-feature standardisation (population standard deviation).
struct ScalerParams {
  Vector in_mean, in_std;
  Vector out_mean, out_std;

  Matrix scale_inputs(const Matrix& x) const;
  Matrix scale_outputs(const Matrix& y) const;
  Matrix unscale_inputs(const Matrix& x) const;
  Matrix unscale_outputs(const Matrix& y) const;
  Vector scale_input(std::span<const double> x) const;
  Vector unscale_output(std::span<const double> y) const;
  LabeledDataset scale(const LabeledDataset& ds) const;
  LabeledDataset unscale(const LabeledDataset& ds) const;
};

/// Throws ValidationError for fewer than two samples or a constant feature.
ScalerParams fit_scaler(const LabeledDataset& ds);

/// Adds i.i.d. N(0, sd²) noise to every output entry. sd = 0 returns the input
/// unchanged; identical seeds give bit-identical results.
LabeledDataset add_noise(const LabeledDataset& ds, double sd, std::uint64_t seed);

struct SplitFractions {
  double train = 0.525;
  double validation = 0.175;
  double test = 0.30;
};

struct DataSplits {
  LabeledDataset train;
  LabeledDataset validation;
  LabeledDataset test;
};

/// Seeded shuffle followed by contiguous cuts at the given fractions.
DataSplits split_dataset(const LabeledDataset& ds, const SplitFractions& f, std::uint64_t seed);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
  double noise_sd = 0.0;
  SplitFractions split;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch;
  double train_mse;
  double val_mse;
};

struct TrainResult {
  Network net;  ///< parameters with the lowest validation MSE
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  ///< 0 means the initial parameters were kept
  double best_val_mse = 0.0;
};

/// Mini-batch Adam on the row-mean squared error. After every step
/// SpectralDense weights are renormalised to σ_max = 1 and LinearClipped
/// entries clamped, so every recorded checkpoint satisfies the constraints.
/// Early stopping keeps the parameters with the minimum validation MSE.
///
/// Throws NumericalError on a non-finite loss.
TrainResult train(const Network& init, const LabeledDataset& train_set,
                  const LabeledDataset& validation_set, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Mean over rows of ‖ŷ − y‖² (the slice is assumed to be in scaled space).
double evaluate_mse(const Network& net, const LabeledDataset& scaled_slice);
/// Scales a raw slice with the scaler first.
double evaluate_mse(const Network& net, const LabeledDataset& raw_slice,
                    const ScalerParams& scaler);

// CSV persistence. Metadata lines start with '#'.
void write_dataset_csv(std::ostream& os, const LabeledDataset& ds,
                       const std::vector<std::string>& columns,
                       const std::vector<std::string>& metadata = {});
LabeledDataset read_dataset_csv(std::istream& is, std::size_t input_cols);
void write_scaler_csv(std::ostream& os, const ScalerParams& s);
ScalerParams read_scaler_csv(std::istream& is);
void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& h);

}  // namespace lcnn
