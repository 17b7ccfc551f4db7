#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "lcnn/cstr.hpp"
#include "lcnn/network.hpp"
#include "lcnn/training.hpp"

namespace lcnn {

/// One-step prediction model x⁺ = F(x, u) with its Jacobians.
class PredictionModel {
 public:
  struct Step {
    State2 x;
    std::array<double, 4> dx;  ///< ∂x⁺/∂x, row-major 2×2
    std::array<double, 4> du;  ///< ∂x⁺/∂u
  };

  virtual ~PredictionModel() = default;
  virtual State2 predict(const State2& x, const Input2& u) const = 0;
  virtual Step predict_with_jacobian(const State2& x, const Input2& u) const = 0;
};

/// A trained network acting on standardised (x, u) and returning the
/// standardised next state.
class NetworkModel : public PredictionModel {
 public:
  NetworkModel(Network net, ScalerParams scaler);
  State2 predict(const State2& x, const Input2& u) const override;
  Step predict_with_jacobian(const State2& x, const Input2& u) const override;

 private:
  Network net_;
  ScalerParams scaler_;
};

/// Sample-and-hold Euler integration of the reactor equations.
class FirstPrinciplesModel : public PredictionModel {
 public:
  explicit FirstPrinciplesModel(ProcessConfig cfg);
  State2 predict(const State2& x, const Input2& u) const override;
  Step predict_with_jacobian(const State2& x, const Input2& u) const override;

 private:
  ProcessConfig cfg_;
};

struct SolverSettings {
  std::size_t restarts = 6;         ///< random starts besides zero and the Φ sequence
  std::size_t iterations = 60;      ///< projected-gradient iterations per start
  std::size_t polish_iterations = 120;  ///< Nelder–Mead iterations on the best start
  double penalty = 1e4;             ///< exact-penalty weight
  double feasibility_tol = 1e-6;
  std::uint64_t seed = 0;
};

struct MPCConfig {
  std::size_t N = 2;
  Matrix Q1{{6.25e-4, 0.0}, {0.0, 1.0}};
  Matrix Q2{{0.01, 0.0}, {0.0, 4e-12}};
  ProcessConfig process;  ///< expected to be finalised
  LyapunovSpec spec;
  SolverSettings solver;

  void validate() const;
};

/// Sontag's universal formula on the heat-input channel with ΔC_A0 = 0,
/// saturated to the input box. Φ(0) = 0.
Input2 phi_controller(const State2& x, const ProcessConfig& process, const LyapunovSpec& spec);

/// x̃_k = x_k followed by N applications of the model.
std::vector<State2> rollout(const PredictionModel& model, const State2& x0,
                            const std::vector<Input2>& inputs);

struct LmpcSolution {
  Input2 u{0.0, 0.0};             ///< first input to apply
  std::vector<Input2> sequence;   ///< full optimal sequence
  std::vector<State2> predicted;  ///< model rollout under the sequence
  double cost = 0.0;
  double phi_cost = 0.0;   ///< cost of the Φ candidate sequence
  double violation = 0.0;  ///< raw constraint violation of the returned sequence
  bool feasible = false;   ///< false when the solver fell back to Φ
  bool inner_region = false;  ///< x_k was already inside Ω_ρnn
};

/// Solves the Lyapunov-based MPC problem at x_k. Throws ValidationError when
/// x_k lies outside Ω_ρ.
LmpcSolution solve_lmpc(const PredictionModel& model, const State2& xk, const MPCConfig& cfg);

/// Stage cost Σ x̃ᵀQ₁x̃ + uᵀQ₂u along a rollout, and the raw constraint
/// violation at x_k. Exposed for checking solver output.
double lmpc_cost(const PredictionModel& model, const State2& xk,
                 const std::vector<Input2>& inputs, const MPCConfig& cfg);
double lmpc_violation(const PredictionModel& model, const State2& xk,
                      const std::vector<Input2>& inputs, const MPCConfig& cfg);

struct TraceRow {
  double t = 0.0;
  State2 x{0.0, 0.0};          ///< plant state at t
  State2 predicted{0.0, 0.0};  ///< model prediction of the next state
  Input2 u{0.0, 0.0};          ///< input applied over [t, t+Δ)
  double V = 0.0;
  bool feasible = false;
};

struct ClosedLoopTrace {
  std::vector<TraceRow> rows;  ///< the last row holds the final state only
  std::string error;           ///< non-empty if the run halted early

  bool halted() const { return !error.empty(); }
};

/// Alternates solve_lmpc on the model and sample-and-hold integration of the
/// plant for round(t_end / Δ) steps.
ClosedLoopTrace simulate_closed_loop(const PredictionModel& model, const MPCConfig& cfg,
                                     const State2& x0, double t_end);

/// Same loop with Φ applied directly (no optimisation).
ClosedLoopTrace simulate_phi_loop(const MPCConfig& cfg, const State2& x0, double t_end);

/// Entry into and confinement to Ω_level along a trace, judged at the
/// sampling instants.
struct TraceStability {
  bool entered = false;
  double entry_time = -1.0;        ///< first t with V ≤ level
  bool remained = false;           ///< V ≤ level at every later sample, no halt
  double max_v_after_entry = 0.0;
  std::size_t infeasible_steps = 0;  ///< rows where the solver fell back to Φ
};

TraceStability analyze_trace(const ClosedLoopTrace& trace, double level);

/// Columns t,C_A,T,V,dCA0,Q,feasible_flag with absolute C_A and T.
void write_trace_csv(std::ostream& os, const ClosedLoopTrace& trace, const CSTRParams& p);

}  // namespace lcnn
