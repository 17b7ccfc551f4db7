#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lcnn/lmpc.hpp"
#include "oracles.hpp"

using namespace lcnn;

namespace {

MPCConfig default_mpc() {
  MPCConfig cfg;
  cfg.process = finalize_process_config(ProcessConfig{});
  return cfg;
}

// 2 xᵀP ẋ with ẋ the reactor right-hand side.
double vdot(const State2& x, const Input2& u, const MPCConfig& cfg) {
  const State2 f = rhs(x, u, cfg.process.params);
  const Matrix& P = cfg.spec.P;
  return 2.0 * ((P(0, 0) * x[0] + P(0, 1) * x[1]) * f[0] + (P(1, 0) * x[0] + P(1, 1) * x[1]) * f[1]);
}

State2 random_in_region(const MPCConfig& cfg, double level, std::mt19937_64& rng) {
  const State2 hw = level_set_half_widths(cfg.spec, level);
  std::uniform_real_distribution<double> a(-hw[0], hw[0]), b(-hw[1], hw[1]);
  for (;;) {
    const State2 x{a(rng), b(rng)};
    if (lyapunov_value(x, cfg.spec) <= level) return x;
  }
}

}  // namespace

TEST(Phi, VanishesAtOriginAndStaysInInputBox) {
  const MPCConfig cfg = default_mpc();
  const Input2 u0 = phi_controller({0.0, 0.0}, cfg.process, cfg.spec);
  EXPECT_EQ(u0[0], 0.0);
  EXPECT_EQ(u0[1], 0.0);
  std::mt19937_64 rng(1);
  const Box& U = cfg.process.input_box;
  for (int t = 0; t < 1000; ++t) {
    const Input2 u = phi_controller(random_in_region(cfg, cfg.spec.rho, rng), cfg.process, cfg.spec);
    EXPECT_EQ(u[0], 0.0);
    EXPECT_GE(u[1], U.lo[1]);
    EXPECT_LE(u[1], U.hi[1]);
  }
}

TEST(Phi, UnsaturatedFormulaGivesStrictDecrease) {
  const MPCConfig cfg = default_mpc();
  const CSTRParams& p = cfg.process.params;
  const double q_scale = 0.5 * (cfg.process.input_box.hi[1] - cfg.process.input_box.lo[1]);
  std::mt19937_64 rng(2);
  int checked = 0;
  // Φ saturates over most of Ω_ρ, so sample level sets down to 1e-6 ρ.
  std::uniform_real_distribution<double> decade(-6.0, 0.0);
  for (int t = 0; t < 40000; ++t) {
    const State2 x = random_in_region(cfg, cfg.spec.rho * std::pow(10.0, decade(rng)), rng);
    const Input2 u = phi_controller(x, cfg.process, cfg.spec);
    if (std::abs(u[1]) >= cfg.process.input_box.hi[1] * (1 - 1e-12)) continue;
    const double px1 = cfg.spec.P(1, 0) * x[0] + cfg.spec.P(1, 1) * x[1];
    const double lg = 2.0 * px1 / (p.rho_L * p.Cp * p.V) * q_scale;
    if (std::abs(lg) < 1e-9) continue;
    const double lf = vdot(x, {0.0, 0.0}, cfg);
    EXPECT_NEAR(vdot(x, u, cfg), -std::sqrt(lf * lf + std::pow(lg, 4)),
                1e-8 * std::max(1.0, std::abs(lf)));
    EXPECT_LT(vdot(x, u, cfg), 0.0);
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

// On the line where the heat input has no effect on V, the drift raises V
// for positive concentration deviations, so no input of this form can make
// V decrease there.
TEST(Phi, HeatInputCannotDecreaseVOnItsNullLine) {
  const MPCConfig cfg = default_mpc();
  const double ratio = -cfg.spec.P(1, 0) / cfg.spec.P(1, 1);
  for (double ca : {0.2, 0.5, 1.0}) {
    const State2 x{ca, ratio * ca};
    ASSERT_LE(lyapunov_value(x, cfg.spec), cfg.spec.rho);
    EXPECT_GT(vdot(x, {0.0, 0.0}, cfg), 0.0);
    EXPECT_NEAR(vdot(x, {0.0, 5e5}, cfg), vdot(x, {0.0, 0.0}, cfg),
                1e-9 * std::abs(vdot(x, {0.0, 0.0}, cfg)));
  }
}

TEST(Models, FirstPrinciplesJacobianMatchesFiniteDifferences) {
  const MPCConfig cfg = default_mpc();
  const FirstPrinciplesModel m(cfg.process);
  const State2 x{-0.8, 30.0};
  const Input2 u{1.0, -2e5};
  const auto s = m.predict_with_jacobian(x, u);
  const double hx[2] = {1e-6, 1e-4}, hu[2] = {1e-6, 1.0};
  for (std::size_t c = 0; c < 2; ++c) {
    State2 xp = x, xm = x;
    xp[c] += hx[c];
    xm[c] -= hx[c];
    Input2 up = u, um = u;
    up[c] += hu[c];
    um[c] -= hu[c];
    const State2 fxp = m.predict(xp, u), fxm = m.predict(xm, u);
    const State2 fup = m.predict(x, up), fum = m.predict(x, um);
    for (std::size_t r = 0; r < 2; ++r) {
      const double dx = (fxp[r] - fxm[r]) / (2 * hx[c]), du = (fup[r] - fum[r]) / (2 * hu[c]);
      EXPECT_NEAR(s.dx[r * 2 + c], dx, 1e-5 * std::max(1.0, std::abs(dx)));
      EXPECT_NEAR(s.du[r * 2 + c], du, 1e-5 * std::max(1e-6, std::abs(du)));
    }
  }
}

TEST(Models, NetworkJacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  const std::size_t hidden[] = {8, 8};
  const Network net = make_lcnn(4, hidden, 2, rng);
  ScalerParams s;
  s.in_mean = {0.1, 5.0, 0.2, 1e4};
  s.in_std = {1.0, 40.0, 2.0, 3e5};
  s.out_mean = {0.0, 3.0};
  s.out_std = {1.2, 45.0};
  const NetworkModel m(net, s);
  const State2 x{-0.5, 20.0};
  const Input2 u{0.7, 1e5};
  const auto st = m.predict_with_jacobian(x, u);
  const State2 y = m.predict(x, u);
  EXPECT_EQ(st.x, y);
  const double hx[2] = {1e-6, 1e-5}, hu[2] = {1e-6, 1e-1};
  for (std::size_t c = 0; c < 2; ++c) {
    State2 xp = x, xm = x;
    xp[c] += hx[c];
    xm[c] -= hx[c];
    Input2 up = u, um = u;
    up[c] += hu[c];
    um[c] -= hu[c];
    for (std::size_t r = 0; r < 2; ++r) {
      const double dx = (m.predict(xp, u)[r] - m.predict(xm, u)[r]) / (2 * hx[c]);
      const double du = (m.predict(x, up)[r] - m.predict(x, um)[r]) / (2 * hu[c]);
      EXPECT_NEAR(st.dx[r * 2 + c], dx, 1e-5 * std::max(1.0, std::abs(dx)));
      EXPECT_NEAR(st.du[r * 2 + c], du, 1e-5 * std::max(1e-6, std::abs(du)));
    }
  }
  EXPECT_THROW(NetworkModel(make_lcnn(3, hidden, 2, rng), s), ValidationError);
}

TEST(Lmpc, SolutionIsNoWorseThanPhiAndSatisfiesConstraints) {
  const MPCConfig cfg = default_mpc();
  const FirstPrinciplesModel m(cfg.process);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 15; ++t) {
    const double level = t < 10 ? cfg.spec.rho : cfg.spec.rho_nn;
    const State2 x = random_in_region(cfg, level, rng);
    const LmpcSolution sol = solve_lmpc(m, x, cfg);
    ASSERT_EQ(sol.sequence.size(), cfg.N);
    EXPECT_EQ(sol.u, sol.sequence.front());
    EXPECT_NEAR(lmpc_cost(m, x, sol.sequence, cfg), sol.cost, 1e-9 * std::max(1.0, sol.cost));
    EXPECT_LE(sol.cost, sol.phi_cost * (1 + 1e-12) + 1e-12);
    EXPECT_EQ(sol.inner_region, lyapunov_value(x, cfg.spec) <= cfg.spec.rho_nn);
    const double viol = lmpc_violation(m, x, sol.sequence, cfg);
    if (sol.feasible) {
      EXPECT_LE(viol, cfg.solver.feasibility_tol);
      if (!sol.inner_region) {
        const Input2 phi = phi_controller(x, cfg.process, cfg.spec);
        EXPECT_LE(lyapunov_value(sol.predicted[1], cfg.spec),
                  lyapunov_value(m.predict(x, phi), cfg.spec) + 1e-6);
      }
    } else {
      EXPECT_EQ(sol.u, phi_controller(x, cfg.process, cfg.spec));
    }
  }
}

TEST(Lmpc, IsDeterministic) {
  const MPCConfig cfg = default_mpc();
  const FirstPrinciplesModel m(cfg.process);
  const LmpcSolution a = solve_lmpc(m, {-1.65, 72.0}, cfg), b = solve_lmpc(m, {-1.65, 72.0}, cfg);
  EXPECT_EQ(a.u, b.u);
  EXPECT_EQ(a.cost, b.cost);
}

TEST(Lmpc, RejectsStatesOutsideRegionAndBadConfig) {
  MPCConfig cfg = default_mpc();
  const FirstPrinciplesModel m(cfg.process);
  EXPECT_THROW(solve_lmpc(m, {5.0, 0.0}, cfg), ValidationError);
  EXPECT_THROW(solve_lmpc(m, {NAN, 0.0}, cfg), ValidationError);
  cfg.N = 0;
  EXPECT_THROW(solve_lmpc(m, {0.0, 0.0}, cfg), ValidationError);
  cfg = default_mpc();
  cfg.Q1 = Matrix{{-1.0, 0.0}, {0.0, 1.0}};
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(ClosedLoop, ShortRunHasExpectedShape) {
  const MPCConfig cfg = default_mpc();
  const FirstPrinciplesModel m(cfg.process);
  const ClosedLoopTrace tr = simulate_closed_loop(m, cfg, {-1.65, 72.0}, 0.01);
  ASSERT_FALSE(tr.halted());
  ASSERT_EQ(tr.rows.size(), 11u);
  EXPECT_NEAR(tr.rows.back().t, 0.01, 1e-12);
  for (std::size_t i = 0; i + 1 < tr.rows.size(); ++i) {
    const State2 next = step_sample_hold(tr.rows[i].x, tr.rows[i].u, cfg.process);
    EXPECT_EQ(next, tr.rows[i + 1].x);
    EXPECT_NEAR(tr.rows[i].V, lyapunov_value(tr.rows[i].x, cfg.spec), 1e-12);
  }
  EXPECT_LT(tr.rows.back().V, tr.rows.front().V);
  EXPECT_THROW(simulate_closed_loop(m, cfg, {5.0, 0.0}, 0.01), ValidationError);
}

TEST(ClosedLoop, AnalyzeTrace) {
  ClosedLoopTrace tr;
  const double vs[] = {10, 5, 1.5, 1.9, 1.0, 0.5};
  for (int i = 0; i < 6; ++i) {
    TraceRow r;
    r.t = 0.1 * i;
    r.V = vs[i];
    r.feasible = i != 1 && i != 5;
    tr.rows.push_back(r);
  }
  TraceStability s = analyze_trace(tr, 2.0);
  EXPECT_TRUE(s.entered);
  EXPECT_DOUBLE_EQ(s.entry_time, 0.2);
  EXPECT_TRUE(s.remained);
  EXPECT_DOUBLE_EQ(s.max_v_after_entry, 1.9);
  EXPECT_EQ(s.infeasible_steps, 1u);

  tr.rows[4].V = 2.5;
  s = analyze_trace(tr, 2.0);
  EXPECT_FALSE(s.remained);
  EXPECT_DOUBLE_EQ(s.max_v_after_entry, 2.5);

  tr.rows[4].V = 1.0;
  tr.error = "diverged";
  EXPECT_FALSE(analyze_trace(tr, 2.0).remained);

  s = analyze_trace(tr, 0.1);
  EXPECT_FALSE(s.entered);
  EXPECT_DOUBLE_EQ(s.entry_time, -1.0);
}
