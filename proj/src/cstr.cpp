#include "lcnn/cstr.hpp"

#include <cmath>
#include <random>

#include <json.hpp>

namespace lcnn {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ValidationError(std::string("process constant ") + name + " must be positive");
}

double rate(const CSTRParams& p, double T) { return p.k0 * std::exp(-p.E / (p.R * T)); }

}  // namespace

void CSTRParams::validate() const {
  require_positive(F, "F");
  require_positive(V, "V");
  require_positive(k0, "k0");
  require_positive(E, "E");
  require_positive(R, "R");
  require_positive(rho_L, "rho_L");
  require_positive(Cp, "Cp");
  require_positive(T0, "T0");
  require_positive(CAs, "CAs");
  require_positive(Ts, "Ts");
  require_positive(CA0s, "CA0s");
  if (!(dH < 0.0)) throw ValidationError("reaction enthalpy must be negative (exothermic)");
  if (Qs != 0.0) throw ValidationError("steady-state heat input must be zero");
}

void ProcessConfig::validate() const {
  params.validate();
  input_box.validate();
  validity.validate();
  if (input_box.dim() != 2 || validity.dim() != 2)
    throw ValidationError("input and validity boxes must be two-dimensional");
  if (!(h_c > 0.0)) throw ValidationError("integration step must be positive");
  if (!(delta >= h_c)) throw ValidationError("sampling period must be at least one step");
}

CSTRParams refine_steady_state(const CSTRParams& p, double max_dCA, double max_dT) {
  p.validate();
  CSTRParams out = p;
  const double a = -p.dH / (p.rho_L * p.Cp);
  double CA = p.CAs, T = p.Ts;
  for (int it = 0; it < 50; ++it) {
    const double k = rate(p, T);
    const double dk = k * p.E / (p.R * T * T);
    const double g1 = p.F / p.V * (p.CA0s - CA) - k * CA * CA;
    const double g2 = p.F / p.V * (p.T0 - T) + a * k * CA * CA + p.Qs / (p.rho_L * p.Cp * p.V);
    const double j11 = -p.F / p.V - 2.0 * k * CA;
    const double j12 = -dk * CA * CA;
    const double j21 = 2.0 * a * k * CA;
    const double j22 = -p.F / p.V + a * dk * CA * CA;
    const double det = j11 * j22 - j12 * j21;
    if (det == 0.0) throw NumericalError("steady-state Newton: singular Jacobian");
    const double dCA = (g1 * j22 - g2 * j12) / det;
    const double dT = (j11 * g2 - j21 * g1) / det;
    CA -= dCA;
    T -= dT;
    if (std::abs(dCA) < 1e-14 * std::max(1.0, CA) && std::abs(dT) < 1e-12 * T) break;
  }
  if (!(std::abs(CA - p.CAs) <= max_dCA && std::abs(T - p.Ts) <= max_dT))
    throw ValidationError("steady state moved to (" + std::to_string(CA) + ", " +
                          std::to_string(T) + "); check the process constants");
  out.CAs = CA;
  out.Ts = T;
  return out;
}

ProcessConfig finalize_process_config(ProcessConfig cfg) {
  cfg.validate();
  if (cfg.refine_steady_state) {
    cfg.params = refine_steady_state(cfg.params);
    cfg.refine_steady_state = false;
  }
  return cfg;
}

State2 rhs(const State2& x, const Input2& u, const CSTRParams& p) {
  const double CA = p.CAs + x[0];
  const double T = p.Ts + x[1];
  if (!(T > 0.0)) throw NumericalError("non-positive absolute temperature");
  const double CA0 = p.CA0s + u[0];
  const double Q = p.Qs + u[1];
  const double r = rate(p, T) * CA * CA;
  return {p.F / p.V * (CA0 - CA) - r,
          p.F / p.V * (p.T0 - T) - p.dH / (p.rho_L * p.Cp) * r + Q / (p.rho_L * p.Cp * p.V)};
}

RhsJacobian rhs_jacobian(const State2& x, const Input2& u, const CSTRParams& p) {
  (void)u;
  const double CA = p.CAs + x[0];
  const double T = p.Ts + x[1];
  if (!(T > 0.0)) throw NumericalError("non-positive absolute temperature");
  const double k = rate(p, T);
  const double dk = k * p.E / (p.R * T * T);
  const double a = -p.dH / (p.rho_L * p.Cp);
  RhsJacobian j;
  j.dx = {-p.F / p.V - 2.0 * k * CA, -dk * CA * CA,
          2.0 * a * k * CA, -p.F / p.V + a * dk * CA * CA};
  j.du = {p.F / p.V, 0.0, 0.0, 1.0 / (p.rho_L * p.Cp * p.V)};
  return j;
}

namespace {

std::size_t step_count(double delta, double h_c) {
  if (!(h_c > 0.0)) throw ValidationError("integration step must be positive");
  if (delta < 0.0) throw ValidationError("sampling period must be non-negative");
  if (delta == 0.0) return 0;
  if (h_c > delta) throw ValidationError("integration step exceeds the sampling period");
  const double ratio = delta / h_c;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-9 * ratio)
    throw ValidationError("sampling period is not a multiple of the integration step");
  return static_cast<std::size_t>(n);
}

void check_validity(const State2& x, const Box& validity, std::size_t step) {
  for (std::size_t i = 0; i < 2; ++i)
    if (!(x[i] >= validity.lo[i] && x[i] <= validity.hi[i]))
      throw NumericalError("integration diverged: state left the validity box at step " +
                           std::to_string(step));
}

}  // namespace

State2 step_sample_hold(const State2& x0, const Input2& u, const CSTRParams& p, double delta,
                        double h_c, const Box& validity) {
  const std::size_t n = step_count(delta, h_c);
  State2 x = x0;
  for (std::size_t s = 0; s < n; ++s) {
    const State2 f = rhs(x, u, p);
    x[0] += h_c * f[0];
    x[1] += h_c * f[1];
    check_validity(x, validity, s + 1);
  }
  return x;
}

State2 step_sample_hold(const State2& x0, const Input2& u, const ProcessConfig& cfg) {
  return step_sample_hold(x0, u, cfg.params, cfg.delta, cfg.h_c, cfg.validity);
}

StepSensitivity step_with_sensitivity(const State2& x0, const Input2& u,
                                      const ProcessConfig& cfg) {
  const std::size_t n = step_count(cfg.delta, cfg.h_c);
  const double h = cfg.h_c;
  StepSensitivity s{x0, {1.0, 0.0, 0.0, 1.0}, {0.0, 0.0, 0.0, 0.0}};
  auto propagate = [h](const std::array<double, 4>& A, const std::array<double, 4>& J) {
    // (I + hA)·J
    return std::array<double, 4>{
        J[0] + h * (A[0] * J[0] + A[1] * J[2]), J[1] + h * (A[0] * J[1] + A[1] * J[3]),
        J[2] + h * (A[2] * J[0] + A[3] * J[2]), J[3] + h * (A[2] * J[1] + A[3] * J[3])};
  };
  for (std::size_t k = 0; k < n; ++k) {
    const State2 f = rhs(s.x, u, cfg.params);
    const RhsJacobian jac = rhs_jacobian(s.x, u, cfg.params);
    s.dx0 = propagate(jac.dx, s.dx0);
    auto du = propagate(jac.dx, s.du);
    for (std::size_t i = 0; i < 4; ++i) du[i] += h * jac.du[i];
    s.du = du;
    s.x[0] += h * f[0];
    s.x[1] += h * f[1];
    check_validity(s.x, cfg.validity, k + 1);
  }
  return s;
}

void LyapunovSpec::validate() const {
  if (P.rows() != 2 || P.cols() != 2) throw ValidationError("P must be 2x2");
  if (P(0, 1) != P(1, 0)) throw ValidationError("P must be symmetric");
  if (!(P(0, 0) > 0.0 && P(0, 0) * P(1, 1) - P(0, 1) * P(1, 0) > 0.0))
    throw ValidationError("P must be positive definite");
  if (!(rho_nn > 0.0 && rho_nn < rho)) throw ValidationError("need 0 < rho_nn < rho");
}

double lyapunov_value(std::span<const double> x, const LyapunovSpec& spec) {
  if (x.size() != spec.P.rows()) throw ValidationError("lyapunov_value: dimension mismatch");
  double v = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) v += x[i] * spec.P(i, j) * x[j];
  return v;
}

bool in_level_set(std::span<const double> x, const LyapunovSpec& spec, double level) {
  return lyapunov_value(x, spec) <= level;
}

State2 level_set_half_widths(const LyapunovSpec& spec, double level) {
  spec.validate();
  const double det = spec.P(0, 0) * spec.P(1, 1) - spec.P(0, 1) * spec.P(1, 0);
  return {std::sqrt(level * spec.P(1, 1) / det), std::sqrt(level * spec.P(0, 0) / det)};
}

LabeledDataset generate_dataset(const ProcessConfig& cfg, const LyapunovSpec& spec,
                                const DatasetOptions& opts) {
  cfg.validate();
  spec.validate();
  if (opts.n_samples == 0) throw ValidationError("n_samples must be at least 1");
  const State2 hw = level_set_half_widths(spec, spec.rho);
  const Box& U = cfg.input_box;

  std::vector<std::array<double, 4>> inputs;
  if (opts.mode == SamplingMode::Uniform) {
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t attempts = 0;
    inputs.reserve(opts.n_samples);
    while (inputs.size() < opts.n_samples) {
      const double x1 = -hw[0] + 2.0 * hw[0] * unit(rng);
      const double x2 = -hw[1] + 2.0 * hw[1] * unit(rng);
      ++attempts;
      const double xv[2] = {x1, x2};
      if (!in_level_set(xv, spec, spec.rho)) {
        if (attempts >= 1000 && inputs.size() * 100 < attempts)
          throw ValidationError("rejection sampling acceptance below 1%; check rho and P");
        continue;
      }
      const double u1 = U.lo[0] + (U.hi[0] - U.lo[0]) * unit(rng);
      const double u2 = U.lo[1] + (U.hi[1] - U.lo[1]) * unit(rng);
      inputs.push_back({x1, x2, u1, u2});
    }
  } else {
    const auto k = static_cast<std::size_t>(
        std::max(2.0, std::ceil(std::pow(static_cast<double>(opts.n_samples), 0.25))));
    auto lin = [k](double lo, double hi, std::size_t i) {
      return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1);
    };
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) {
        const double xv[2] = {lin(-hw[0], hw[0], a), lin(-hw[1], hw[1], b)};
        if (!in_level_set(xv, spec, spec.rho)) continue;
        for (std::size_t c = 0; c < k; ++c)
          for (std::size_t d = 0; d < k; ++d)
            inputs.push_back({xv[0], xv[1], lin(U.lo[0], U.hi[0], c), lin(U.lo[1], U.hi[1], d)});
      }
  }

  LabeledDataset ds{Matrix(inputs.size(), 4), Matrix(inputs.size(), 2)};
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& in = inputs[i];
    const State2 next = step_sample_hold({in[0], in[1]}, {in[2], in[3]}, cfg);
    for (std::size_t c = 0; c < 4; ++c) ds.inputs(i, c) = in[c];
    ds.outputs(i, 0) = next[0];
    ds.outputs(i, 1) = next[1];
  }
  return ds;
}

namespace {

nlohmann::json box_json(const Box& b) { return {{"lo", b.lo}, {"hi", b.hi}}; }

Box box_from(const nlohmann::json& j, const Box& fallback) {
  if (!j.is_object()) return fallback;
  return {j.value("lo", fallback.lo), j.value("hi", fallback.hi)};
}

}  // namespace

std::string process_config_to_json(const ProcessConfig& cfg, const LyapunovSpec& spec) {
  const CSTRParams& p = cfg.params;
  nlohmann::json j;
  j["params"] = {{"F", p.F},       {"V", p.V},         {"k0", p.k0},     {"E", p.E},
                 {"R", p.R},       {"dH", p.dH},       {"rho_L", p.rho_L}, {"Cp", p.Cp},
                 {"T0", p.T0},     {"CAs", p.CAs},     {"Ts", p.Ts},     {"CA0s", p.CA0s},
                 {"Qs", p.Qs}};
  j["input_box"] = box_json(cfg.input_box);
  j["validity_box"] = box_json(cfg.validity);
  j["delta"] = cfg.delta;
  j["h_c"] = cfg.h_c;
  j["refine_steady_state"] = cfg.refine_steady_state;
  j["lyapunov"] = {{"P", {{spec.P(0, 0), spec.P(0, 1)}, {spec.P(1, 0), spec.P(1, 1)}}},
                   {"rho", spec.rho},
                   {"rho_nn", spec.rho_nn}};
  return j.dump(2) + "\n";
}

void process_config_from_json(const std::string& text, ProcessConfig& cfg, LyapunovSpec& spec) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("process config: ") + e.what());
  }
  try {
    if (j.contains("params")) {
      const auto& q = j["params"];
      CSTRParams& p = cfg.params;
      p.F = q.value("F", p.F);
      p.V = q.value("V", p.V);
      p.k0 = q.value("k0", p.k0);
      p.E = q.value("E", p.E);
      p.R = q.value("R", p.R);
      p.dH = q.value("dH", p.dH);
      p.rho_L = q.value("rho_L", p.rho_L);
      p.Cp = q.value("Cp", p.Cp);
      p.T0 = q.value("T0", p.T0);
      p.CAs = q.value("CAs", p.CAs);
      p.Ts = q.value("Ts", p.Ts);
      p.CA0s = q.value("CA0s", p.CA0s);
      p.Qs = q.value("Qs", p.Qs);
    }
    cfg.input_box = box_from(j.value("input_box", nlohmann::json()), cfg.input_box);
    cfg.validity = box_from(j.value("validity_box", nlohmann::json()), cfg.validity);
    cfg.delta = j.value("delta", cfg.delta);
    cfg.h_c = j.value("h_c", cfg.h_c);
    cfg.refine_steady_state = j.value("refine_steady_state", cfg.refine_steady_state);
    if (j.contains("lyapunov")) {
      const auto& l = j["lyapunov"];
      if (l.contains("P")) {
        const auto rows = l["P"].get<std::vector<std::vector<double>>>();
        if (rows.size() != 2 || rows[0].size() != 2 || rows[1].size() != 2)
          throw ValidationError("process config: P must be 2x2");
        spec.P = Matrix{{rows[0][0], rows[0][1]}, {rows[1][0], rows[1][1]}};
      }
      spec.rho = l.value("rho", spec.rho);
      spec.rho_nn = l.value("rho_nn", spec.rho_nn);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("process config: ") + e.what());
  }
  cfg.validate();
  spec.validate();
}

}  // namespace lcnn
