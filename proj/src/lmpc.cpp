#include "lcnn/lmpc.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <random>

#include "lcnn/io.hpp"

namespace lcnn {

NetworkModel::NetworkModel(Network net, ScalerParams scaler)
    : net_(std::move(net)), scaler_(std::move(scaler)) {
  net_.validate();
  if (net_.input_dim() != 4 || net_.output_dim() != 2)
    throw ValidationError("prediction network must map 4 inputs to 2 outputs");
  if (scaler_.in_mean.size() != 4 || scaler_.out_mean.size() != 2)
    throw ValidationError("scaler dimensions do not match the prediction network");
}

State2 NetworkModel::predict(const State2& x, const Input2& u) const {
  const double in[4] = {x[0], x[1], u[0], u[1]};
  const Vector y = scaler_.unscale_output(forward(net_, scaler_.scale_input(in)));
  return {y[0], y[1]};
}

PredictionModel::Step NetworkModel::predict_with_jacobian(const State2& x, const Input2& u) const {
  const double in[4] = {x[0], x[1], u[0], u[1]};
  const auto [ys, j] = forward_with_jacobian(net_, scaler_.scale_input(in));
  const Vector y = scaler_.unscale_output(ys);
  Step s{{y[0], y[1]}, {}, {}};
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c) {
      s.dx[r * 2 + c] = scaler_.out_std[r] * j(r, c) / scaler_.in_std[c];
      s.du[r * 2 + c] = scaler_.out_std[r] * j(r, c + 2) / scaler_.in_std[c + 2];
    }
  return s;
}

FirstPrinciplesModel::FirstPrinciplesModel(ProcessConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

State2 FirstPrinciplesModel::predict(const State2& x, const Input2& u) const {
  return step_sample_hold(x, u, cfg_);
}

PredictionModel::Step FirstPrinciplesModel::predict_with_jacobian(const State2& x,
                                                                  const Input2& u) const {
  const StepSensitivity s = step_with_sensitivity(x, u, cfg_);
  return {s.x, s.dx0, s.du};
}

void MPCConfig::validate() const {
  if (N == 0) throw ValidationError("MPC horizon must be at least 1");
  for (const Matrix* q : {&Q1, &Q2}) {
    if (q->rows() != 2 || q->cols() != 2) throw ValidationError("MPC weights must be 2x2");
    const double a = (*q)(0, 0), b = 0.5 * ((*q)(0, 1) + (*q)(1, 0)), d = (*q)(1, 1);
    if (a < 0.0 || d < 0.0 || a * d - b * b < -1e-15 * std::max(1.0, a * d))
      throw ValidationError("MPC weights must be positive semidefinite");
  }
  process.validate();
  spec.validate();
  if (solver.feasibility_tol < 0.0 || solver.penalty <= 0.0)
    throw ValidationError("invalid solver settings");
}

Input2 phi_controller(const State2& x, const ProcessConfig& process, const LyapunovSpec& spec) {
  const CSTRParams& p = process.params;
  const State2 f0 = rhs(x, {0.0, 0.0}, p);
  const double px0 = spec.P(0, 0) * x[0] + spec.P(0, 1) * x[1];
  const double px1 = spec.P(1, 0) * x[0] + spec.P(1, 1) * x[1];
  const double lf = 2.0 * (px0 * f0[0] + px1 * f0[1]);
  // The formula is applied to the heat input normalised by the half-width of
  // its range, v = Q / q_scale.
  const Box& U = process.input_box;
  const double q_scale = 0.5 * (U.hi[1] - U.lo[1]);
  const double lg = 2.0 * px1 / (p.rho_L * p.Cp * p.V) * q_scale;
  double v = 0.0;
  if (lg != 0.0) v = -(lf + std::sqrt(lf * lf + lg * lg * lg * lg)) / lg;
  return {std::clamp(0.0, U.lo[0], U.hi[0]), std::clamp(v * q_scale, U.lo[1], U.hi[1])};
}

std::vector<State2> rollout(const PredictionModel& model, const State2& x0,
                            const std::vector<Input2>& inputs) {
  std::vector<State2> xs{x0};
  for (const Input2& u : inputs) xs.push_back(model.predict(xs.back(), u));
  return xs;
}

namespace {

double quad(const Matrix& q, double a, double b) {
  return a * (q(0, 0) * a + q(0, 1) * b) + b * (q(1, 0) * a + q(1, 1) * b);
}

double vvalue(const State2& x, const LyapunovSpec& spec) { return lyapunov_value(x, spec); }

// Solver state for one LMPC instance. Decision variables z ∈ [−1, 1]^{2N}
// map to inputs through the centre and half-width of U.
class Problem {
 public:
  Problem(const PredictionModel& model, const State2& xk, const MPCConfig& cfg)
      : model_(model), xk_(xk), cfg_(cfg) {
    const Box& U = cfg.process.input_box;
    for (std::size_t i = 0; i < 2; ++i) {
      center_[i] = 0.5 * (U.lo[i] + U.hi[i]);
      half_[i] = 0.5 * (U.hi[i] - U.lo[i]);
    }
    const double vk = vvalue(xk, cfg.spec);
    inner_ = vk <= cfg.spec.rho_nn;
    if (!inner_) {
      const Input2 phi = phi_controller(xk, cfg.process, cfg.spec);
      v_phi_ = vvalue(model.predict(xk, phi), cfg.spec);
    }
  }

  bool inner() const { return inner_; }
  std::size_t dim() const { return 2 * cfg_.N; }

  std::vector<Input2> inputs(const Vector& z) const {
    std::vector<Input2> u(cfg_.N);
    for (std::size_t i = 0; i < cfg_.N; ++i)
      for (std::size_t c = 0; c < 2; ++c) u[i][c] = center_[c] + half_[c] * z[2 * i + c];
    return u;
  }

  Vector to_z(const std::vector<Input2>& u) const {
    Vector z(dim());
    for (std::size_t i = 0; i < cfg_.N; ++i)
      for (std::size_t c = 0; c < 2; ++c)
        z[2 * i + c] = half_[c] > 0.0 ? (u[i][c] - center_[c]) / half_[c] : 0.0;
    return z;
  }

  struct Eval {
    double cost = 0.0;
    double violation = 0.0;
    double merit = 0.0;
    Vector grad;  // of the merit, in z
  };

  Eval evaluate(const Vector& z, bool with_grad) const {
    const auto u = inputs(z);
    const std::size_t N = cfg_.N;
    std::vector<State2> x{xk_};
    std::vector<PredictionModel::Step> steps;
    for (std::size_t i = 0; i < N; ++i) {
      if (with_grad) {
        steps.push_back(model_.predict_with_jacobian(x.back(), u[i]));
        x.push_back(steps.back().x);
      } else {
        x.push_back(model_.predict(x.back(), u[i]));
      }
    }
    Eval e;
    std::vector<double> weight(N + 1, 0.0);  // penalty multiplier on ∇V(x_i)
    const double mu = cfg_.solver.penalty;
    for (std::size_t i = 1; i <= N; ++i) {
      e.cost += quad(cfg_.Q1, x[i][0], x[i][1]) + quad(cfg_.Q2, u[i - 1][0], u[i - 1][1]);
      const double v = vvalue(x[i], cfg_.spec);
      double g = 0.0;
      if (inner_)
        g = v - cfg_.spec.rho_nn;
      else if (i == 1)
        g = v - v_phi_;
      if (g > 0.0) {
        e.violation += g;
        weight[i] = mu;
      }
    }
    e.merit = e.cost + mu * e.violation;
    if (!with_grad) return e;

    e.grad.assign(dim(), 0.0);
    const Matrix& P = cfg_.spec.P;
    const Matrix& Q1 = cfg_.Q1;
    const Matrix& Q2 = cfg_.Q2;
    std::array<double, 2> lambda{0.0, 0.0};
    for (std::size_t i = N; i >= 1; --i) {
      const State2& xi = x[i];
      std::array<double, 2> local{
          (Q1(0, 0) + Q1(0, 0)) * xi[0] + (Q1(0, 1) + Q1(1, 0)) * xi[1],
          (Q1(1, 0) + Q1(0, 1)) * xi[0] + (Q1(1, 1) + Q1(1, 1)) * xi[1]};
      local[0] += weight[i] * 2.0 * (P(0, 0) * xi[0] + P(0, 1) * xi[1]);
      local[1] += weight[i] * 2.0 * (P(1, 0) * xi[0] + P(1, 1) * xi[1]);
      if (i < N) {
        const auto& A = steps[i].dx;
        local[0] += A[0] * lambda[0] + A[2] * lambda[1];
        local[1] += A[1] * lambda[0] + A[3] * lambda[1];
      }
      lambda = local;
      const auto& Bm = steps[i - 1].du;
      const Input2& ui = u[i - 1];
      const double gu0 = (Q2(0, 0) + Q2(0, 0)) * ui[0] + (Q2(0, 1) + Q2(1, 0)) * ui[1] +
                         Bm[0] * lambda[0] + Bm[2] * lambda[1];
      const double gu1 = (Q2(1, 0) + Q2(0, 1)) * ui[0] + (Q2(1, 1) + Q2(1, 1)) * ui[1] +
                         Bm[1] * lambda[0] + Bm[3] * lambda[1];
      e.grad[2 * (i - 1)] = gu0 * half_[0];
      e.grad[2 * (i - 1) + 1] = gu1 * half_[1];
    }
    return e;
  }

  static void project(Vector& z) {
    for (double& v : z) v = std::clamp(v, -1.0, 1.0);
  }

  /// Projected gradient descent with a backtracking (Armijo) step.
  Vector projected_gradient(Vector z, std::size_t iterations) const {
    project(z);
    Eval cur = evaluate(z, true);
    double step = 0.0;
    for (std::size_t it = 0; it < iterations; ++it) {
      const double gn = norm2(cur.grad);
      if (!(gn > 0.0)) break;
      if (step == 0.0) step = 0.5 / gn;
      bool moved = false;
      for (int ls = 0; ls < 40; ++ls) {
        Vector trial = z;
        for (std::size_t k = 0; k < z.size(); ++k) trial[k] -= step * cur.grad[k];
        project(trial);
        double dec = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) dec += cur.grad[k] * (z[k] - trial[k]);
        const Eval next = evaluate(trial, true);
        if (next.merit <= cur.merit - 1e-4 * dec && next.merit < cur.merit) {
          z = std::move(trial);
          cur = next;
          step *= 2.0;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    return z;
  }

  /// Nelder–Mead on the merit function with clamping to the box.
  Vector nelder_mead(const Vector& start, std::size_t iterations) const {
    const std::size_t n = start.size();
    std::vector<Vector> simplex{start};
    for (std::size_t k = 0; k < n; ++k) {
      Vector v = start;
      v[k] += v[k] > 0.5 ? -0.05 : 0.05;
      simplex.push_back(v);
    }
    auto merit = [&](Vector v) {
      project(v);
      return evaluate(v, false).merit;
    };
    std::vector<double> f;
    for (const Vector& v : simplex) f.push_back(merit(v));
    std::vector<std::size_t> idx(n + 1);
    for (std::size_t it = 0; it < iterations; ++it) {
      for (std::size_t k = 0; k <= n; ++k) idx[k] = k;
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
      const std::size_t best = idx[0], worst = idx[n], second = idx[n - 1];
      if (std::abs(f[worst] - f[best]) <= 1e-12 * (1.0 + std::abs(f[best]))) break;
      Vector centroid(n, 0.0);
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t c = 0; c < n; ++c) centroid[c] += simplex[idx[k]][c] / n;
      auto along = [&](double t) {
        Vector v(n);
        for (std::size_t c = 0; c < n; ++c)
          v[c] = centroid[c] + t * (simplex[worst][c] - centroid[c]);
        project(v);
        return v;
      };
      Vector r = along(-1.0);
      const double fr = merit(r);
      if (fr < f[best]) {
        Vector e = along(-2.0);
        const double fe = merit(e);
        if (fe < fr) {
          simplex[worst] = e;
          f[worst] = fe;
        } else {
          simplex[worst] = r;
          f[worst] = fr;
        }
      } else if (fr < f[second]) {
        simplex[worst] = r;
        f[worst] = fr;
      } else {
        Vector c = along(fr < f[worst] ? -0.5 : 0.5);
        const double fc = merit(c);
        if (fc < std::min(fr, f[worst])) {
          simplex[worst] = c;
          f[worst] = fc;
        } else {
          for (std::size_t k = 1; k <= n; ++k) {
            Vector& v = simplex[idx[k]];
            for (std::size_t c2 = 0; c2 < n; ++c2)
              v[c2] = simplex[best][c2] + 0.5 * (v[c2] - simplex[best][c2]);
            f[idx[k]] = merit(v);
          }
        }
      }
    }
    const std::size_t best =
        static_cast<std::size_t>(std::min_element(f.begin(), f.end()) - f.begin());
    Vector out = simplex[best];
    project(out);
    return out;
  }

 private:
  const PredictionModel& model_;
  State2 xk_;
  const MPCConfig& cfg_;
  std::array<double, 2> center_{};
  std::array<double, 2> half_{};
  bool inner_ = false;
  double v_phi_ = 0.0;
};

std::vector<Input2> phi_sequence(const PredictionModel& model, const State2& xk,
                                 const MPCConfig& cfg) {
  std::vector<Input2> seq;
  State2 x = xk;
  for (std::size_t i = 0; i < cfg.N; ++i) {
    seq.push_back(phi_controller(x, cfg.process, cfg.spec));
    if (i + 1 < cfg.N) x = model.predict(x, seq.back());
  }
  return seq;
}

bool lex_less(const Vector& a, const Vector& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

double lmpc_cost(const PredictionModel& model, const State2& xk,
                 const std::vector<Input2>& inputs, const MPCConfig& cfg) {
  const auto xs = rollout(model, xk, inputs);
  double c = 0.0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    c += quad(cfg.Q1, xs[i][0], xs[i][1]) + quad(cfg.Q2, inputs[i - 1][0], inputs[i - 1][1]);
  return c;
}

double lmpc_violation(const PredictionModel& model, const State2& xk,
                      const std::vector<Input2>& inputs, const MPCConfig& cfg) {
  const Box& U = cfg.process.input_box;
  double viol = 0.0;
  for (const Input2& u : inputs)
    for (std::size_t c = 0; c < 2; ++c)
      viol += std::max(0.0, U.lo[c] - u[c]) + std::max(0.0, u[c] - U.hi[c]);
  const auto xs = rollout(model, xk, inputs);
  if (vvalue(xk, cfg.spec) <= cfg.spec.rho_nn) {
    for (std::size_t i = 1; i < xs.size(); ++i)
      viol += std::max(0.0, vvalue(xs[i], cfg.spec) - cfg.spec.rho_nn);
  } else if (xs.size() > 1) {
    const Input2 phi = phi_controller(xk, cfg.process, cfg.spec);
    viol += std::max(0.0, vvalue(xs[1], cfg.spec) - vvalue(model.predict(xk, phi), cfg.spec));
  }
  return viol;
}

LmpcSolution solve_lmpc(const PredictionModel& model, const State2& xk, const MPCConfig& cfg) {
  cfg.validate();
  if (!std::isfinite(xk[0]) || !std::isfinite(xk[1]))
    throw ValidationError("solve_lmpc: non-finite state");
  if (!in_level_set(xk, cfg.spec, cfg.spec.rho))
    throw ValidationError("solve_lmpc: state lies outside the stability region");

  const Problem prob(model, xk, cfg);
  const std::vector<Input2> phi_seq = phi_sequence(model, xk, cfg);
  const Vector z_phi = prob.to_z(phi_seq);
  const Problem::Eval phi_eval = prob.evaluate(z_phi, false);
  const bool phi_feasible = phi_eval.violation <= cfg.solver.feasibility_tol;

  std::vector<Vector> starts{Vector(prob.dim(), 0.0), z_phi};
  std::mt19937_64 rng(cfg.solver.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t s = 0; s < cfg.solver.restarts; ++s) {
    Vector z(prob.dim());
    for (double& v : z) v = unit(rng);
    starts.push_back(std::move(z));
  }

  struct Candidate {
    Vector z;
    Problem::Eval eval;
  };
  std::vector<Candidate> candidates;
  auto consider = [&](Vector z) {
    Problem::project(z);
    Problem::Eval e = prob.evaluate(z, false);
    // Pull a slightly infeasible point back toward the feasible Φ sequence.
    if (e.violation > cfg.solver.feasibility_tol && phi_feasible) {
      double lo = 0.0, hi = 1.0;
      for (int k = 0; k < 50; ++k) {
        const double t = 0.5 * (lo + hi);
        Vector zt(z.size());
        for (std::size_t c = 0; c < z.size(); ++c) zt[c] = z_phi[c] + t * (z[c] - z_phi[c]);
        if (prob.evaluate(zt, false).violation <= cfg.solver.feasibility_tol)
          lo = t;
        else
          hi = t;
      }
      for (std::size_t c = 0; c < z.size(); ++c) z[c] = z_phi[c] + lo * (z[c] - z_phi[c]);
      e = prob.evaluate(z, false);
    }
    candidates.push_back({std::move(z), e});
  };

  std::vector<Vector> locals;
  for (const Vector& s : starts) locals.push_back(prob.projected_gradient(s, cfg.solver.iterations));
  std::size_t best_local = 0;
  for (std::size_t i = 1; i < locals.size(); ++i)
    if (prob.evaluate(locals[i], false).merit < prob.evaluate(locals[best_local], false).merit)
      best_local = i;
  const Vector polish_start = locals[best_local];
  for (Vector& z : locals) consider(std::move(z));
  consider(prob.nelder_mead(polish_start, cfg.solver.polish_iterations));
  consider(z_phi);

  const Candidate* best = nullptr;
  for (const Candidate& c : candidates) {
    if (c.eval.violation > cfg.solver.feasibility_tol) continue;
    if (!best || c.eval.cost < best->eval.cost ||
        (c.eval.cost == best->eval.cost && lex_less(c.z, best->z)))
      best = &c;
  }

  LmpcSolution sol;
  sol.inner_region = prob.inner();
  sol.phi_cost = phi_eval.cost;
  if (best) {
    sol.sequence = prob.inputs(best->z);
    sol.cost = best->eval.cost;
    sol.violation = best->eval.violation;
    sol.feasible = true;
  } else {
    sol.sequence = phi_seq;
    sol.cost = phi_eval.cost;
    sol.violation = phi_eval.violation;
    sol.feasible = false;
  }
  sol.u = sol.sequence.front();
  sol.predicted = rollout(model, xk, sol.sequence);
  return sol;
}

namespace {

ClosedLoopTrace run_loop(const MPCConfig& cfg, const State2& x0, double t_end,
                         const std::function<std::pair<Input2, std::pair<State2, bool>>(
                             const State2&)>& policy) {
  cfg.validate();
  if (!(t_end >= 0.0)) throw ValidationError("simulation end time must be non-negative");
  if (!in_level_set(x0, cfg.spec, cfg.spec.rho))
    throw ValidationError("initial state lies outside the stability region");
  const auto steps = static_cast<std::size_t>(std::llround(t_end / cfg.process.delta));
  ClosedLoopTrace trace;
  State2 x = x0;
  for (std::size_t k = 0; k < steps; ++k) {
    TraceRow row;
    row.t = static_cast<double>(k) * cfg.process.delta;
    row.x = x;
    row.V = vvalue(x, cfg.spec);
    try {
      const auto [u, pred] = policy(x);
      row.u = u;
      row.predicted = pred.first;
      row.feasible = pred.second;
      trace.rows.push_back(row);
      x = step_sample_hold(x, u, cfg.process);
    } catch (const std::exception& e) {
      trace.rows.push_back(row);
      trace.error = "step " + std::to_string(k) + ": " + e.what();
      return trace;
    }
  }
  TraceRow last;
  last.t = static_cast<double>(steps) * cfg.process.delta;
  last.x = x;
  last.predicted = x;
  last.V = vvalue(x, cfg.spec);
  last.feasible = true;
  trace.rows.push_back(last);
  return trace;
}

}  // namespace

ClosedLoopTrace simulate_closed_loop(const PredictionModel& model, const MPCConfig& cfg,
                                     const State2& x0, double t_end) {
  return run_loop(cfg, x0, t_end, [&](const State2& x) {
    const LmpcSolution sol = solve_lmpc(model, x, cfg);
    return std::make_pair(sol.u, std::make_pair(sol.predicted[1], sol.feasible));
  });
}

ClosedLoopTrace simulate_phi_loop(const MPCConfig& cfg, const State2& x0, double t_end) {
  return run_loop(cfg, x0, t_end, [&](const State2& x) {
    const Input2 u = phi_controller(x, cfg.process, cfg.spec);
    return std::make_pair(u, std::make_pair(step_sample_hold(x, u, cfg.process), true));
  });
}

TraceStability analyze_trace(const ClosedLoopTrace& trace, double level) {
  TraceStability out;
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    const TraceRow& r = trace.rows[i];
    if (i + 1 < trace.rows.size() && !r.feasible) ++out.infeasible_steps;
    if (!out.entered) {
      if (r.V <= level) {
        out.entered = true;
        out.entry_time = r.t;
        out.remained = true;
        out.max_v_after_entry = r.V;
      }
      continue;
    }
    out.max_v_after_entry = std::max(out.max_v_after_entry, r.V);
    if (r.V > level) out.remained = false;
  }
  if (trace.halted()) out.remained = false;
  return out;
}

void write_trace_csv(std::ostream& os, const ClosedLoopTrace& trace, const CSTRParams& p) {
  os << "t,C_A,T,V,dCA0,Q,feasible_flag\n";
  for (const TraceRow& r : trace.rows)
    os << io::format_double(r.t) << ',' << io::format_double(p.CAs + r.x[0]) << ','
       << io::format_double(p.Ts + r.x[1]) << ',' << io::format_double(r.V) << ','
       << io::format_double(r.u[0]) << ',' << io::format_double(r.u[1]) << ','
       << (r.feasible ? 1 : 0) << '\n';
  if (trace.halted()) os << "# halted: " << trace.error << '\n';
}

}  // namespace lcnn
