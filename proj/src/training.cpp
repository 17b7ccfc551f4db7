#include "lcnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include "lcnn/io.hpp"

namespace lcnn {

void LabeledDataset::validate() const {
  if (inputs.rows() != outputs.rows())
    throw ValidationError("dataset: input and output counts differ");
  if (!inputs.all_finite() || !outputs.all_finite())
    throw ValidationError("dataset: non-finite entries");
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> rows) const {
  LabeledDataset out{Matrix(rows.size(), inputs.cols()), Matrix(rows.size(), outputs.cols())};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(inputs.row(rows[i]).begin(), inputs.cols(), out.inputs.row(i).begin());
    std::copy_n(outputs.row(rows[i]).begin(), outputs.cols(), out.outputs.row(i).begin());
  }
  return out;
}

namespace {

void column_stats(const Matrix& m, Vector& mean, Vector& sd, const char* what) {
  const std::size_t n = m.rows();
  mean.assign(m.cols(), 0.0);
  sd.assign(m.cols(), 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) mean[c] += m(r, c);
  for (double& v : mean) v /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double d = m(r, c) - mean[c];
      sd[c] += d * d;
    }
  for (std::size_t c = 0; c < sd.size(); ++c) {
    sd[c] = std::sqrt(sd[c] / static_cast<double>(n));
    if (!(sd[c] > 0.0))
      throw ValidationError(std::string("fit_scaler: ") + what + " feature " +
                            std::to_string(c) + " has zero variance");
  }
}

Matrix affine_columns(const Matrix& m, const Vector& mean, const Vector& sd, bool forward) {
  if (m.cols() != mean.size()) throw ValidationError("scaler: feature count mismatch");
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c)
      row[c] = forward ? (row[c] - mean[c]) / sd[c] : row[c] * sd[c] + mean[c];
  }
  return out;
}

}  // namespace

Matrix ScalerParams::scale_inputs(const Matrix& x) const {
  return affine_columns(x, in_mean, in_std, true);
}
Matrix ScalerParams::scale_outputs(const Matrix& y) const {
  return affine_columns(y, out_mean, out_std, true);
}
Matrix ScalerParams::unscale_inputs(const Matrix& x) const {
  return affine_columns(x, in_mean, in_std, false);
}
Matrix ScalerParams::unscale_outputs(const Matrix& y) const {
  return affine_columns(y, out_mean, out_std, false);
}
Vector ScalerParams::scale_input(std::span<const double> x) const {
  return scale_inputs(Matrix::row_vector(x)).data();
}
Vector ScalerParams::unscale_output(std::span<const double> y) const {
  return unscale_outputs(Matrix::row_vector(y)).data();
}
LabeledDataset ScalerParams::scale(const LabeledDataset& ds) const {
  return {scale_inputs(ds.inputs), scale_outputs(ds.outputs)};
}
LabeledDataset ScalerParams::unscale(const LabeledDataset& ds) const {
  return {unscale_inputs(ds.inputs), unscale_outputs(ds.outputs)};
}

ScalerParams fit_scaler(const LabeledDataset& ds) {
  ds.validate();
  if (ds.size() < 2) throw ValidationError("fit_scaler: need at least two samples");
  ScalerParams s;
  column_stats(ds.inputs, s.in_mean, s.in_std, "input");
  column_stats(ds.outputs, s.out_mean, s.out_std, "output");
  return s;
}

LabeledDataset add_noise(const LabeledDataset& ds, double sd, std::uint64_t seed) {
  if (!(sd >= 0.0)) throw ValidationError("add_noise: sd must be non-negative");
  LabeledDataset out = ds;
  if (sd == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sd);
  for (double& v : out.outputs.data()) v += noise(rng);
  return out;
}

DataSplits split_dataset(const LabeledDataset& ds, const SplitFractions& f, std::uint64_t seed) {
  ds.validate();
  if (f.train < 0 || f.validation < 0 || f.test < 0 ||
      std::abs(f.train + f.validation + f.test - 1.0) > 1e-9)
    throw ValidationError("split fractions must be non-negative and sum to 1");
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n = static_cast<double>(ds.size());
  const auto n_train = static_cast<std::size_t>(std::llround(f.train * n));
  const auto n_val = std::min(ds.size() - n_train,
                              static_cast<std::size_t>(std::llround(f.validation * n)));
  std::span<const std::size_t> all(idx);
  return {ds.subset(all.subspan(0, n_train)), ds.subset(all.subspan(n_train, n_val)),
          ds.subset(all.subspan(n_train + n_val))};
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ValidationError("learning rate must be positive");
  if (batch_size == 0) throw ValidationError("batch size must be positive");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
    throw ValidationError("Adam betas must lie in [0, 1)");
  if (!(noise_sd >= 0)) throw ValidationError("noise SD must be non-negative");
}

double evaluate_mse(const Network& net, const LabeledDataset& scaled_slice) {
  if (scaled_slice.size() == 0) return 0.0;
  const Matrix pred = forward_batch(net, scaled_slice.inputs);
  if (pred.cols() != scaled_slice.outputs.cols())
    throw ValidationError("evaluate_mse: output width mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data()[i] - scaled_slice.outputs.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(scaled_slice.size());
}

double evaluate_mse(const Network& net, const LabeledDataset& raw_slice,
                    const ScalerParams& scaler) {
  return evaluate_mse(net, scaler.scale(raw_slice));
}

namespace {

struct AdamSlot {
  Matrix m;
  Matrix v;
};

void adam_update(Matrix& param, const Matrix& grad, AdamSlot& slot, const TrainConfig& cfg,
                 std::size_t step) {
  if (slot.m.empty()) {
    slot.m = Matrix(grad.rows(), grad.cols());
    slot.v = Matrix(grad.rows(), grad.cols());
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  const double lr = cfg.learning_rate;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.data()[i];
    double& m = slot.m.data()[i];
    double& v = slot.v.data()[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    param.data()[i] -= lr * (m / c1) / (std::sqrt(v / c2) + cfg.epsilon);
  }
}

}  // namespace

TrainResult train(const Network& init, const LabeledDataset& train_set,
                  const LabeledDataset& validation_set, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  init.validate();
  train_set.validate();
  validation_set.validate();
  if (train_set.inputs.cols() != init.input_dim() ||
      train_set.outputs.cols() != init.output_dim())
    throw ValidationError("train: dataset dimensions do not match the network");
  if (train_set.size() == 0) throw ValidationError("train: empty training set");

  const LabeledDataset& monitor = validation_set.size() > 0 ? validation_set : train_set;
  TrainResult result{init, {}, 0, evaluate_mse(init, monitor)};
  if (cfg.max_epochs == 0) return result;

  Network net = init;
  std::vector<AdamSlot> w_slots(net.depth()), b_slots(net.depth());
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  std::size_t step = 0;
  std::size_t since_best = 0;

  const std::size_t in_cols = train_set.inputs.cols();
  const std::size_t out_cols = train_set.outputs.cols();
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t b = std::min(cfg.batch_size, order.size() - start);
      Matrix xb(b, in_cols), yb(b, out_cols);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t r = order[start + i];
        std::copy_n(train_set.inputs.row(r).begin(), in_cols, xb.row(i).begin());
        std::copy_n(train_set.outputs.row(r).begin(), out_cols, yb.row(i).begin());
      }
      ad::Tape tape;
      const NetworkVars vars = record_parameters(tape, net);
      ad::Var loss;
      try {
        loss = ad::mse_rows(forward(net, vars, tape.constant(std::move(xb))), yb);
      } catch (const NumericalError& e) {
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(step + 1) + " (" + e.what() + ")");
      }
      tape.backward(loss);
      ++step;
      for (std::size_t l = 0; l < net.depth(); ++l) {
        adam_update(net.layers[l].weight, vars.weights[l].grad(), w_slots[l], cfg, step);
        Matrix bias = Matrix::row_vector(net.layers[l].bias);
        adam_update(bias, vars.biases[l].grad(), b_slots[l], cfg, step);
        net.layers[l].bias = bias.data();
      }
      project_spectral_inplace(net);
      loss_sum += loss.value()(0, 0) * static_cast<double>(b);
    }
    const EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()),
                          evaluate_mse(net, monitor)};
    if (!std::isfinite(rec.val_mse))
      throw NumericalError("train: non-finite validation loss at epoch " + std::to_string(epoch));
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_mse < result.best_val_mse) {
      result.best_val_mse = rec.val_mse;
      result.best_epoch = epoch;
      result.net = net;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

void write_dataset_csv(std::ostream& os, const LabeledDataset& ds,
                       const std::vector<std::string>& columns,
                       const std::vector<std::string>& metadata) {
  ds.validate();
  if (columns.size() != ds.inputs.cols() + ds.outputs.cols())
    throw ValidationError("write_dataset_csv: column name count mismatch");
  for (const std::string& m : metadata) os << "# " << m << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << '\n';
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t c = 0; c < ds.inputs.cols(); ++c)
      os << (c ? "," : "") << io::format_double(ds.inputs(r, c));
    for (std::size_t c = 0; c < ds.outputs.cols(); ++c)
      os << ',' << io::format_double(ds.outputs(r, c));
    os << '\n';
  }
}

LabeledDataset read_dataset_csv(std::istream& is, std::size_t input_cols) {
  std::string line;
  std::vector<std::string> header;
  std::vector<double> in, out;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto fields = io::split(line, ',');
    if (header.empty()) {
      header = std::move(fields);
      if (header.size() <= input_cols)
        throw ValidationError("dataset CSV: header has too few columns");
      continue;
    }
    if (fields.size() != header.size())
      throw ValidationError("dataset CSV: row " + std::to_string(rows + 1) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(header.size()));
    for (std::size_t c = 0; c < fields.size(); ++c)
      (c < input_cols ? in : out).push_back(io::parse_double(fields[c]));
    ++rows;
  }
  if (header.empty()) throw ValidationError("dataset CSV: missing header");
  LabeledDataset ds{Matrix(rows, input_cols, std::move(in)),
                    Matrix(rows, header.size() - input_cols, std::move(out))};
  ds.validate();
  return ds;
}

void write_scaler_csv(std::ostream& os, const ScalerParams& s) {
  os << "role,index,mean,std\n";
  for (std::size_t i = 0; i < s.in_mean.size(); ++i)
    os << "input," << i << ',' << io::format_double(s.in_mean[i]) << ','
       << io::format_double(s.in_std[i]) << '\n';
  for (std::size_t i = 0; i < s.out_mean.size(); ++i)
    os << "output," << i << ',' << io::format_double(s.out_mean[i]) << ','
       << io::format_double(s.out_std[i]) << '\n';
}

ScalerParams read_scaler_csv(std::istream& is) {
  ScalerParams s;
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = io::split(line, ',');
    if (f.size() != 4) throw ValidationError("scaler CSV: expected 4 fields per row");
    const double mean = io::parse_double(f[2]);
    const double sd = io::parse_double(f[3]);
    if (!(sd > 0)) throw ValidationError("scaler CSV: std must be positive");
    if (f[0] == "input") {
      s.in_mean.push_back(mean);
      s.in_std.push_back(sd);
    } else if (f[0] == "output") {
      s.out_mean.push_back(mean);
      s.out_std.push_back(sd);
    } else {
      throw ValidationError("scaler CSV: unknown role '" + f[0] + "'");
    }
  }
  if (s.in_mean.empty() || s.out_mean.empty()) throw ValidationError("scaler CSV: empty");
  return s;
}

void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& h) {
  os << "epoch,train_mse,val_mse\n";
  for (const EpochRecord& r : h)
    os << r.epoch << ',' << io::format_double(r.train_mse) << ','
       << io::format_double(r.val_mse) << '\n';
}

}  // namespace lcnn
