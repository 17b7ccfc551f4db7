#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lcnn/certify.hpp"
#include "lcnn/cstr.hpp"
#include "lcnn/lmpc.hpp"
#include "lcnn/training.hpp"

namespace lcnn::exp {

inline constexpr const char* kToolVersion = "1.0.0";

struct Seeds {
  std::uint64_t data = 7;
  std::uint64_t split = 11;
  std::uint64_t init = 5;
  std::uint64_t train = 9;
  std::uint64_t noise = 3;
  std::uint64_t lipschitz = 13;

  /// data = base, then base+1, base+2, ... in field order.
  static Seeds from_base(std::uint64_t base);
};

struct ExperimentConfig {
  std::string preset = "desk";
  std::filesystem::path process_config;  ///< optional JSON; empty uses built-in constants
  std::filesystem::path out_dir = "runs/desk";

  std::size_t samples = 20000;        ///< dataset behind the MPC model
  std::size_t table_samples = 5000;   ///< dataset behind the table cells
  std::vector<std::size_t> model_hidden{40, 40};
  std::vector<std::vector<std::size_t>> architectures{{40, 40}, {64, 64}};
  std::vector<double> noise_sds{0.1, 0.2};

  Seeds seeds;
  TrainConfig train;

  std::size_t horizon = 2;
  SolverSettings solver;
  State2 x0{-1.65, 72.0};
  double t_end = 1.0;

  BabOptions bab;
  std::size_t lipschitz_samples = 1000;
  double bound_delta = 0.05;

  void validate() const;
};

/// "desk" or "paper".
ExperimentConfig preset_config(std::string_view name);

/// Reads a JSON config. Keys not present take the values of the preset named
/// by "preset" (default desk); unknown keys are rejected. Relative paths are
/// resolved against the config file's directory.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::filesystem::path& base_dir = {});
std::string experiment_config_to_json(const ExperimentConfig& cfg);

/// FNV-1a of the canonical JSON form.
std::string config_hash(const ExperimentConfig& cfg);

/// The process configuration (steady state refined) and Lyapunov spec.
struct Plant {
  ProcessConfig process;
  LyapunovSpec spec;
};
Plant load_plant(const ExperimentConfig& cfg);
MPCConfig mpc_config(const ExperimentConfig& cfg, const Plant& plant);

/// Box in standardised input space covering the bounding box of Ω_ρ and U.
Box scaled_domain(const Plant& plant, const ScalerParams& scaler);

// Artifact names inside out_dir.
namespace files {
inline constexpr const char* kDataset = "dataset.csv";
inline constexpr const char* kTableDataset = "table_dataset.csv";
inline constexpr const char* kProcess = "process.json";
inline constexpr const char* kModel = "model.json";
inline constexpr const char* kHistory = "history.csv";
inline constexpr const char* kScaler = "scaler.csv";
inline constexpr const char* kTrainReport = "train_report.json";
inline constexpr const char* kCertificate = "certificate.json";
inline constexpr const char* kBounds = "bounds.json";
inline constexpr const char* kMpcSummary = "mpc_summary.json";
inline constexpr const char* kTable1 = "table1.csv";
inline constexpr const char* kTable2 = "table2.csv";
inline constexpr const char* kPhiCheck = "phi_check.csv";
}  // namespace files

std::string cell_model_name(const std::vector<std::size_t>& hidden, double noise_sd, bool lcnn);

struct Table1Row {
  std::vector<std::size_t> hidden;
  double noise_sd = 0.0;
  double lcnn_test_mse = 0.0;
  double dense_test_mse = 0.0;
  double improvement() const { return dense_test_mse / lcnn_test_mse; }
};

struct Table2Row {
  std::vector<std::size_t> hidden;
  double noise_sd = 0.0;
  LipschitzCertificate dense;
  LipschitzCertificate lcnn;
  double ratio() const { return dense.upper / lcnn.upper; }
};

struct MpcRun {
  std::string name;
  ClosedLoopTrace trace;
  TraceStability stability;
};

struct PhiCheckRow {
  State2 x0{0.0, 0.0};
  double reach_time = -1.0;  ///< −1 when V stayed above ρ_nn
  double final_v = 0.0;
};

// Commands. Each writes its artifacts plus manifest_<command>.json into
// out_dir and throws ValidationError naming any missing prerequisite.
void cmd_generate(const ExperimentConfig& cfg);
TrainResult cmd_train(const ExperimentConfig& cfg);
LipschitzCertificate cmd_certify(const ExperimentConfig& cfg);
void cmd_bounds(const ExperimentConfig& cfg);
std::vector<MpcRun> cmd_mpc(const ExperimentConfig& cfg);
std::vector<Table1Row> cmd_table1(const ExperimentConfig& cfg);
std::vector<Table2Row> cmd_table2(const ExperimentConfig& cfg);
std::vector<PhiCheckRow> cmd_phi_check(const ExperimentConfig& cfg, std::size_t n_starts,
                                       double t_limit);

/// Slices shared by train and the table cells: split, scaler fitted on the
/// clean training slice, and scaled copies.
struct PreparedData {
  ScalerParams scaler;
  LabeledDataset train;       ///< scaled
  LabeledDataset validation;  ///< scaled
  LabeledDataset test;        ///< scaled, always noise-free
};
PreparedData prepare_data(const LabeledDataset& raw, const ExperimentConfig& cfg);

/// Trains one network on prepared data. Noise with the given SD is added to
/// the scaled outputs of the training and validation slices.
TrainResult train_network(const PreparedData& data, const std::vector<std::size_t>& hidden,
                          bool lcnn, double noise_sd, const ExperimentConfig& cfg);

/// Φ applied from random starts in Ω_ρ; reports when V first drops below ρ_nn.
std::vector<PhiCheckRow> phi_check(const Plant& plant, std::size_t n_starts, double t_limit,
                                   std::uint64_t seed);

}  // namespace lcnn::exp
