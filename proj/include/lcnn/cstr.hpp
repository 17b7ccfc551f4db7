#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "lcnn/matrix.hpp"
#include "lcnn/network.hpp"
#include "lcnn/training.hpp"

namespace lcnn {

/// Constants of the exothermic second-order CSTR. Units: kmol, m³, h, K, kJ.
struct CSTRParams {
  double F = 5.0;        ///< feed flowrate
  double V = 1.0;        ///< reactor volume
  double k0 = 8.46e6;    ///< pre-exponential factor
  double E = 5.0e4;      ///< activation energy
  double R = 8.314;      ///< gas constant
  double dH = -1.15e4;   ///< reaction enthalpy (negative: exothermic)
  double rho_L = 1000.0; ///< liquid density
  double Cp = 0.231;     ///< heat capacity
  double T0 = 300.0;     ///< feed temperature
  // Operating steady state.
  double CAs = 1.95;
  double Ts = 402.0;
  double CA0s = 4.0;
  double Qs = 0.0;

  void validate() const;
};

/// Process configuration: constants plus the input box, sampling period,
/// integration step and the state box outside which integration is declared
/// divergent.
struct ProcessConfig {
  CSTRParams params;
  Box input_box{{-3.5, -5.0e5}, {3.5, 5.0e5}};  ///< (ΔC_A0, Q) in deviation form
  double delta = 1e-3;                          ///< sampling period Δ
  double h_c = 1e-5;                            ///< Euler step
  Box validity{{-20.0, -350.0}, {20.0, 600.0}};  ///< deviation-state box
  bool refine_steady_state = true;

  void validate() const;
};

using State2 = std::array<double, 2>;
using Input2 = std::array<double, 2>;

/// Runs Newton's method on the steady-state equations in (C_As, T_s) with the
/// feed concentration and heat input held at their nominal values. Throws
/// ValidationError when the root is far from the listed steady state, which
/// indicates a transcription error in the constants.
CSTRParams refine_steady_state(const CSTRParams& p, double max_dCA = 0.05, double max_dT = 2.0);

/// Validates cfg and, when cfg.refine_steady_state is set, replaces the listed
/// steady state with the refined root. Every consumer calls this once.
ProcessConfig finalize_process_config(ProcessConfig cfg);

/// ODE right-hand side in deviation coordinates x = (C_A − C_As, T − T_s),
/// u = (C_A0 − C_A0s, Q − Q_s). Throws NumericalError when T ≤ 0.
State2 rhs(const State2& x, const Input2& u, const CSTRParams& p);

/// ∂rhs/∂x and ∂rhs/∂u (row-major 2×2).
struct RhsJacobian {
  std::array<double, 4> dx;
  std::array<double, 4> du;
};
RhsJacobian rhs_jacobian(const State2& x, const Input2& u, const CSTRParams& p);

/// Explicit Euler over one hold period with u constant. Δ must be an integer
/// multiple of h_c (relative rounding 1e-9). Throws NumericalError if the
/// state leaves cfg.validity.
State2 step_sample_hold(const State2& x0, const Input2& u, const CSTRParams& p, double delta,
                        double h_c, const Box& validity);
State2 step_sample_hold(const State2& x0, const Input2& u, const ProcessConfig& cfg);

/// Same integration, also propagating the sensitivities dx(Δ)/dx₀ and
/// dx(Δ)/du through the Euler recursion.
struct StepSensitivity {
  State2 x;
  std::array<double, 4> dx0;
  std::array<double, 4> du;
};
StepSensitivity step_with_sensitivity(const State2& x0, const Input2& u, const ProcessConfig& cfg);

/// V(x) = xᵀPx and its sublevel sets.
struct LyapunovSpec {
  Matrix P{{1060.0, 22.0}, {22.0, 0.52}};
  double rho = 372.0;
  double rho_nn = 2.0;

  void validate() const;
};

double lyapunov_value(std::span<const double> x, const LyapunovSpec& spec);
bool in_level_set(std::span<const double> x, const LyapunovSpec& spec, double level);
/// Half-widths of the axis-aligned box enclosing {x : xᵀPx ≤ level}.
State2 level_set_half_widths(const LyapunovSpec& spec, double level);

enum class SamplingMode { Uniform, Grid };

struct DatasetOptions {
  std::size_t n_samples = 20000;
  std::uint64_t seed = 0;
  SamplingMode mode = SamplingMode::Uniform;
};

/// Inputs (ΔC_A, ΔT, ΔC_A0, Q), outputs x(Δ). Uniform mode draws x₀ by
/// rejection from the bounding box of Ω_ρ and u uniformly from the input box.
/// Grid mode lays a k×k×k×k grid (k = ⌈n^{1/4}⌉) and keeps points inside Ω_ρ,
/// so its size differs from n_samples.
LabeledDataset generate_dataset(const ProcessConfig& cfg, const LyapunovSpec& spec,
                                const DatasetOptions& opts);

inline const std::vector<std::string>& dataset_columns() {
  static const std::vector<std::string> cols{"CA_dev", "T_dev",      "dCA0",
                                             "Q",      "CA_dev_next", "T_dev_next"};
  return cols;
}

// JSON persistence of the process configuration and the Lyapunov spec.
std::string process_config_to_json(const ProcessConfig& cfg, const LyapunovSpec& spec);
void process_config_from_json(const std::string& text, ProcessConfig& cfg, LyapunovSpec& spec);

}  // namespace lcnn
