#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lcnn/experiments.hpp"
#include "lcnn/io.hpp"

namespace {

using namespace lcnn;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Options {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t phi_starts = 50;
  double phi_time = 0.5;
};

exp::ExperimentConfig resolve(const Options& o) {
  exp::ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = exp::load_experiment_config(o.config);
    if (!o.preset.empty() && o.preset != cfg.preset)
      throw ValidationError("--preset " + o.preset + " conflicts with preset '" + cfg.preset +
                            "' in " + o.config);
  } else {
    cfg = exp::preset_config(o.preset.empty() ? "desk" : o.preset);
  }
  if (o.seed) cfg.seeds = exp::Seeds::from_base(*o.seed);
  if (!o.out.empty()) cfg.out_dir = o.out;
  cfg.validate();
  return cfg;
}

std::string fmt(double v) { return io::format_double(v); }

void report_train(const TrainResult& r) {
  std::printf("best epoch %zu of %zu, validation MSE %s\n", r.best_epoch, r.history.size(),
              fmt(r.best_val_mse).c_str());
}

void report_certificate(const LipschitzCertificate& c) {
  std::printf("Lipschitz upper %s lower %s (%s%s)\n", fmt(c.upper).c_str(), fmt(c.lower).c_str(),
              std::string(to_string(c.method)).c_str(), c.tight ? ", tight" : "");
}

void report_mpc(const std::vector<exp::MpcRun>& runs) {
  for (const auto& r : runs)
    std::printf("%-16s entered %s at t=%s h, remained %s, max V after entry %s, fallback steps %zu%s\n",
                r.name.c_str(), r.stability.entered ? "yes" : "no",
                fmt(r.stability.entry_time).c_str(), r.stability.remained ? "yes" : "no",
                fmt(r.stability.max_v_after_entry).c_str(), r.stability.infeasible_steps,
                r.trace.halted() ? (", halted: " + r.trace.error).c_str() : "");
}

void report_table1(const std::vector<exp::Table1Row>& rows) {
  for (const auto& r : rows)
    std::printf("sd %-4s hidden %zu x %zu  LCNN %s  Dense %s  factor %s\n",
                fmt(r.noise_sd).c_str(), r.hidden.size(), r.hidden.front(),
                fmt(r.lcnn_test_mse).c_str(), fmt(r.dense_test_mse).c_str(),
                fmt(r.improvement()).c_str());
}

void report_table2(const std::vector<exp::Table2Row>& rows) {
  for (const auto& r : rows)
    std::printf("sd %-4s hidden %zu x %zu  Dense %s%s  LCNN %s  ratio %s\n",
                fmt(r.noise_sd).c_str(), r.hidden.size(), r.hidden.front(),
                fmt(r.dense.upper).c_str(), r.dense.tight ? "" : " (not tight)",
                fmt(r.lcnn.upper).c_str(), fmt(r.ratio()).c_str());
}

void report_phi(const std::vector<exp::PhiCheckRow>& rows, double limit) {
  std::size_t ok = 0;
  for (const auto& r : rows) ok += r.reach_time >= 0.0;
  std::printf("%zu of %zu starts reached V < rho_nn within %s h\n", ok, rows.size(),
              fmt(limit).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lipschitz-constrained network modelling and MPC experiments"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--preset", o.preset, "desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    sub->add_option("--seed", o.seed, "base seed; derives all seeds");
    sub->add_option("--out", o.out, "output directory");
  };

  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"generate", "simulate the reactor and write the datasets"},
      {"train", "train the LCNN prediction model"},
      {"certify", "certify the model's Lipschitz constant"},
      {"bounds", "evaluate complexity and generalization bounds"},
      {"mpc", "closed-loop LMPC runs with traces and plots"},
      {"table1", "noisy-data test errors, LCNN vs Dense"},
      {"table2", "certified Lipschitz constants, LCNN vs Dense"},
      {"phi-check", "stabilization check of the explicit controller"},
      {"all", "generate, train, certify, bounds, mpc, table1, table2"},
      {"show-config", "print the resolved config as JSON"},
  };
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    if (std::string(c.name) == "phi-check") {
      sub->add_option("--starts", o.phi_starts, "number of random initial states");
      sub->add_option("--time", o.phi_time, "time limit in hours");
    }
  }

  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    const exp::ExperimentConfig cfg = resolve(o);
    const auto t0 = std::chrono::steady_clock::now();
    const bool all = cmd == "all";
    if (cmd == "show-config") {
      std::cout << exp::experiment_config_to_json(cfg);
      return 0;
    }
    if (cmd == "generate" || all) exp::cmd_generate(cfg);
    if (cmd == "train" || all) report_train(exp::cmd_train(cfg));
    if (cmd == "certify" || all) report_certificate(exp::cmd_certify(cfg));
    if (cmd == "bounds" || all) exp::cmd_bounds(cfg);
    if (cmd == "mpc" || all) report_mpc(exp::cmd_mpc(cfg));
    if (cmd == "table1" || all) report_table1(exp::cmd_table1(cfg));
    if (cmd == "table2" || all) report_table2(exp::cmd_table2(cfg));
    if (cmd == "phi-check") report_phi(exp::cmd_phi_check(cfg, o.phi_starts, o.phi_time), o.phi_time);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s done in %.1f s, outputs in %s\n", cmd.c_str(), secs, cfg.out_dir.c_str());
    return 0;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
}
