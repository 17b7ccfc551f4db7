#include "lcnn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "lcnn/bounds.hpp"
#include "lcnn/io.hpp"
#include "lcnn/model_io.hpp"
#include "lcnn/svg.hpp"

namespace lcnn::exp {

namespace fs = std::filesystem;
using nlohmann::json;

Seeds Seeds::from_base(std::uint64_t base) {
  return {base, base + 1, base + 2, base + 3, base + 4, base + 5};
}

void ExperimentConfig::validate() const {
  if (preset != "desk" && preset != "paper")
    throw ValidationError("config: preset must be 'desk' or 'paper'");
  if (!process_config.empty() && !fs::exists(process_config))
    throw ValidationError("config: process config '" + process_config.string() +
                          "' does not exist");
  if (out_dir.empty()) throw ValidationError("config: out_dir must not be empty");
  if (samples < 10 || table_samples < 10)
    throw ValidationError("config: sample counts must be at least 10");
  auto check_hidden = [](const std::vector<std::size_t>& h) {
    for (std::size_t w : h)
      if (w == 0) throw ValidationError("config: hidden widths must be positive");
  };
  check_hidden(model_hidden);
  if (architectures.empty()) throw ValidationError("config: architectures must not be empty");
  for (const auto& a : architectures) check_hidden(a);
  if (noise_sds.empty()) throw ValidationError("config: noise_sds must not be empty");
  for (double sd : noise_sds)
    if (!(sd >= 0.0) || !std::isfinite(sd))
      throw ValidationError("config: noise SDs must be finite and non-negative");
  train.validate();
  if (horizon == 0) throw ValidationError("config: horizon must be positive");
  if (!(t_end >= 0.0)) throw ValidationError("config: t_end must be non-negative");
  if (!std::isfinite(x0[0]) || !std::isfinite(x0[1]))
    throw ValidationError("config: x0 must be finite");
  if (lipschitz_samples == 0) throw ValidationError("config: lipschitz_samples must be positive");
  if (!(bound_delta > 0.0 && bound_delta <= 1.0))
    throw ValidationError("config: bound_delta must lie in (0, 1]");
}

ExperimentConfig preset_config(std::string_view name) {
  ExperimentConfig cfg;
  if (name == "desk") {
    cfg.preset = "desk";
    cfg.out_dir = "runs/desk";
    return cfg;
  }
  if (name == "paper") {
    cfg.preset = "paper";
    cfg.out_dir = "runs/paper";
    cfg.table_samples = 20000;
    cfg.architectures = {{640, 640}, {1280, 1280}};
    return cfg;
  }
  throw ValidationError("unknown preset '" + std::string(name) + "' (expected desk or paper)");
}

namespace {

json seeds_to_json(const Seeds& s) {
  return {{"data", s.data},   {"split", s.split}, {"init", s.init},
          {"train", s.train}, {"noise", s.noise}, {"lipschitz", s.lipschitz}};
}

json train_to_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"epsilon", t.epsilon},
          {"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},
          {"patience", t.patience},
          {"split", {t.split.train, t.split.validation, t.split.test}}};
}

json solver_to_json(const SolverSettings& s) {
  return {{"restarts", s.restarts},         {"iterations", s.iterations},
          {"polish_iterations", s.polish_iterations}, {"penalty", s.penalty},
          {"feasibility_tol", s.feasibility_tol},     {"seed", s.seed}};
}

template <class T>
struct unsigned_leaf : std::is_unsigned<T> {};
template <class T>
struct unsigned_leaf<std::vector<T>> : unsigned_leaf<T> {};

// Counts and seeds must be written as non-negative integers; get<> would
// silently wrap a negative value.
void require_unsigned(const json& v, const char* key) {
  if (v.is_array()) {
    for (const json& e : v) require_unsigned(e, key);
  } else if (!v.is_number_unsigned()) {
    throw ValidationError(std::string("config: '") + key + "' must be a non-negative integer");
  }
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  if constexpr (unsigned_leaf<T>::value) require_unsigned(j.at(key), key);
  out = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* where) {
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!known.count(k))
      throw ValidationError(std::string("config: unknown key '") + k + "' in " + where);
}

}  // namespace

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  json j{{"preset", cfg.preset},
         {"process_config", cfg.process_config.string()},
         {"out_dir", cfg.out_dir.string()},
         {"samples", cfg.samples},
         {"table_samples", cfg.table_samples},
         {"model_hidden", cfg.model_hidden},
         {"architectures", cfg.architectures},
         {"noise_sds", cfg.noise_sds},
         {"seeds", seeds_to_json(cfg.seeds)},
         {"train", train_to_json(cfg.train)},
         {"mpc",
          {{"horizon", cfg.horizon},
           {"x0", {cfg.x0[0], cfg.x0[1]}},
           {"t_end", cfg.t_end},
           {"solver", solver_to_json(cfg.solver)}}},
         {"certify",
          {{"bab_eps", cfg.bab.eps},
           {"bab_max_boxes", cfg.bab.max_boxes},
           {"bab_enumerate_max_unstable", cfg.bab.enumerate_max_unstable},
           {"lipschitz_samples", cfg.lipschitz_samples},
           {"bound_delta", cfg.bound_delta}}}};
  return j.dump(2) + "\n";
}

ExperimentConfig parse_experiment_config(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config: top level must be an object");
  reject_unknown(j,
                 {"preset", "process_config", "out_dir", "samples", "table_samples",
                  "model_hidden", "architectures", "noise_sds", "seeds", "train", "mpc",
                  "certify"},
                 "the top level");
  ExperimentConfig cfg = preset_config(j.value("preset", std::string("desk")));
  try {
    if (j.contains("process_config")) {
      const fs::path p = j["process_config"].get<std::string>();
      cfg.process_config = p.empty() || p.is_absolute() ? p : base_dir / p;
    }
    if (j.contains("out_dir")) {
      const fs::path p = j["out_dir"].get<std::string>();
      cfg.out_dir = p.is_absolute() ? p : base_dir / p;
    }
    read_if(j, "samples", cfg.samples);
    read_if(j, "table_samples", cfg.table_samples);
    read_if(j, "model_hidden", cfg.model_hidden);
    read_if(j, "architectures", cfg.architectures);
    read_if(j, "noise_sds", cfg.noise_sds);
    if (j.contains("seeds")) {
      const json& s = j["seeds"];
      reject_unknown(s, {"data", "split", "init", "train", "noise", "lipschitz"}, "seeds");
      read_if(s, "data", cfg.seeds.data);
      read_if(s, "split", cfg.seeds.split);
      read_if(s, "init", cfg.seeds.init);
      read_if(s, "train", cfg.seeds.train);
      read_if(s, "noise", cfg.seeds.noise);
      read_if(s, "lipschitz", cfg.seeds.lipschitz);
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      reject_unknown(t,
                     {"learning_rate", "beta1", "beta2", "epsilon", "batch_size", "max_epochs",
                      "patience", "split"},
                     "train");
      read_if(t, "learning_rate", cfg.train.learning_rate);
      read_if(t, "beta1", cfg.train.beta1);
      read_if(t, "beta2", cfg.train.beta2);
      read_if(t, "epsilon", cfg.train.epsilon);
      read_if(t, "batch_size", cfg.train.batch_size);
      read_if(t, "max_epochs", cfg.train.max_epochs);
      read_if(t, "patience", cfg.train.patience);
      if (t.contains("split")) {
        const auto f = t["split"].get<std::vector<double>>();
        if (f.size() != 3) throw ValidationError("config: train.split needs three fractions");
        cfg.train.split = {f[0], f[1], f[2]};
      }
    }
    if (j.contains("mpc")) {
      const json& m = j["mpc"];
      reject_unknown(m, {"horizon", "x0", "t_end", "solver"}, "mpc");
      read_if(m, "horizon", cfg.horizon);
      read_if(m, "t_end", cfg.t_end);
      if (m.contains("x0")) {
        const auto x = m["x0"].get<std::vector<double>>();
        if (x.size() != 2) throw ValidationError("config: mpc.x0 needs two entries");
        cfg.x0 = {x[0], x[1]};
      }
      if (m.contains("solver")) {
        const json& s = m["solver"];
        reject_unknown(s,
                       {"restarts", "iterations", "polish_iterations", "penalty",
                        "feasibility_tol", "seed"},
                       "mpc.solver");
        read_if(s, "restarts", cfg.solver.restarts);
        read_if(s, "iterations", cfg.solver.iterations);
        read_if(s, "polish_iterations", cfg.solver.polish_iterations);
        read_if(s, "penalty", cfg.solver.penalty);
        read_if(s, "feasibility_tol", cfg.solver.feasibility_tol);
        read_if(s, "seed", cfg.solver.seed);
      }
    }
    if (j.contains("certify")) {
      const json& c = j["certify"];
      reject_unknown(c,
                     {"bab_eps", "bab_max_boxes", "bab_enumerate_max_unstable",
                      "lipschitz_samples", "bound_delta"},
                     "certify");
      read_if(c, "bab_eps", cfg.bab.eps);
      read_if(c, "bab_max_boxes", cfg.bab.max_boxes);
      read_if(c, "bab_enumerate_max_unstable", cfg.bab.enumerate_max_unstable);
      read_if(c, "lipschitz_samples", cfg.lipschitz_samples);
      read_if(c, "bound_delta", cfg.bound_delta);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("config file '" + path.string() + "' not found");
  return parse_experiment_config(io::read_file(path), path.parent_path());
}

std::string config_hash(const ExperimentConfig& cfg) {
  return io::hex64(io::fnv1a64(experiment_config_to_json(cfg)));
}

Plant load_plant(const ExperimentConfig& cfg) {
  Plant plant;
  if (!cfg.process_config.empty())
    process_config_from_json(io::read_file(cfg.process_config), plant.process, plant.spec);
  plant.spec.validate();
  plant.process = finalize_process_config(plant.process);
  return plant;
}

MPCConfig mpc_config(const ExperimentConfig& cfg, const Plant& plant) {
  MPCConfig m;
  m.N = cfg.horizon;
  m.process = plant.process;
  m.spec = plant.spec;
  m.solver = cfg.solver;
  m.validate();
  return m;
}

Box scaled_domain(const Plant& plant, const ScalerParams& scaler) {
  const State2 hw = level_set_half_widths(plant.spec, plant.spec.rho);
  const Box& U = plant.process.input_box;
  const Vector lo{-hw[0], -hw[1], U.lo[0], U.lo[1]};
  const Vector hi{hw[0], hw[1], U.hi[0], U.hi[1]};
  Box b{scaler.scale_input(lo), scaler.scale_input(hi)};
  for (std::size_t i = 0; i < b.dim(); ++i)
    if (b.lo[i] > b.hi[i]) std::swap(b.lo[i], b.hi[i]);
  return b;
}

std::string cell_model_name(const std::vector<std::size_t>& hidden, double noise_sd, bool lcnn) {
  std::string name = lcnn ? "lcnn" : "dense";
  for (std::size_t w : hidden) name += "_" + std::to_string(w);
  name += "_sd" + io::format_double(noise_sd) + ".json";
  return name;
}

namespace {

fs::path require(const ExperimentConfig& cfg, const char* name, const char* producer) {
  const fs::path p = cfg.out_dir / name;
  if (!fs::exists(p))
    throw ValidationError("missing artifact '" + p.string() + "': run `lcnn " + producer +
                          "` with the same config first");
  return p;
}

void write_manifest(const ExperimentConfig& cfg, const std::string& command,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  auto digest = [&](const std::string& name) {
    return json{{"file", name},
                {"fnv1a", io::hex64(io::fnv1a64(io::read_file(cfg.out_dir / name)))}};
  };
  json in = json::array(), out = json::array();
  for (const auto& f : inputs) in.push_back(digest(f));
  for (const auto& f : outputs) out.push_back(digest(f));
  const json m{{"tool", "lcnn"},
               {"version", kToolVersion},
               {"command", command},
               {"preset", cfg.preset},
               {"config_hash", config_hash(cfg)},
               {"seeds", seeds_to_json(cfg.seeds)},
               {"config", json::parse(experiment_config_to_json(cfg))},
               {"inputs", in},
               {"outputs", out}};
  io::write_file_atomic(cfg.out_dir / ("manifest_" + command + ".json"), m.dump(2) + "\n");
}

std::string dataset_text(const LabeledDataset& ds, const ExperimentConfig& cfg,
                         std::size_t n) {
  std::ostringstream os;
  write_dataset_csv(os, ds, dataset_columns(),
                    {"samples=" + std::to_string(n), "seed=" + std::to_string(cfg.seeds.data),
                     "config_hash=" + config_hash(cfg)});
  return os.str();
}

LabeledDataset load_dataset(const fs::path& p) {
  std::istringstream is(io::read_file(p));
  return read_dataset_csv(is, 4);
}

std::string json_double(double v) { return io::format_double(v); }

template <class F>
auto run_cells(std::size_t n, F&& fn) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<R> out(n);
  const std::size_t workers = std::max(1U, std::thread::hardware_concurrency());
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  for (std::size_t start = 0; start < n; start += workers) {
    std::vector<std::future<R>> futs;
    for (std::size_t i = start; i < std::min(n, start + workers); ++i)
      futs.push_back(std::async(std::launch::async, fn, i));
    for (std::size_t i = 0; i < futs.size(); ++i) out[start + i] = futs[i].get();
  }
  return out;
}

std::string hidden_label(const std::vector<std::size_t>& h) {
  std::string s = "(";
  for (std::size_t i = 0; i < h.size(); ++i) s += (i ? "," : "") + std::to_string(h[i]);
  return s + ")";
}

json certificate_json(const LipschitzCertificate& c) {
  return {{"method", std::string(to_string(c.method))},
          {"upper", c.upper},
          {"lower", c.lower},
          {"tight", c.tight},
          {"boxes", c.boxes}};
}

LipschitzCertificate certify_network(const Network& net, const Box& domain,
                                     const ExperimentConfig& cfg) {
  if (net.is_dense_relu()) {
    LipschitzCertificate c = bab_lipschitz(net, domain, cfg.bab);
    const double sampled =
        empirical_lipschitz_lower(net, domain, cfg.lipschitz_samples, cfg.seeds.lipschitz);
    c.lower = std::max(c.lower, sampled);
    // Both bounds are sound; report the smaller one.
    const double product = spectral_product_bound(net);
    if (product < c.upper) {
      c.upper = product;
      c.method = CertificateMethod::SpectralProduct;
      c.tight = c.gap() <= cfg.bab.eps;
    }
    return c;
  }
  return certify_lcnn(net, domain, cfg.lipschitz_samples, cfg.seeds.lipschitz);
}

std::vector<std::pair<std::vector<std::size_t>, double>> cells(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::vector<std::size_t>, double>> out;
  for (double sd : cfg.noise_sds)
    for (const auto& h : cfg.architectures) out.emplace_back(h, sd);
  return out;
}

svg::Series ellipse(const LyapunovSpec& spec, double level, const std::string& label,
                    const CSTRParams& p) {
  svg::Series s{label, {}, {}, "#555555", true};
  for (int k = 0; k <= 360; ++k) {
    const double th = k * std::numbers::pi / 180.0;
    const double d0 = std::sin(th), d1 = std::cos(th);
    const double q = spec.P(0, 0) * d0 * d0 + 2 * spec.P(0, 1) * d0 * d1 + spec.P(1, 1) * d1 * d1;
    const double r = std::sqrt(level / q);
    s.x.push_back(p.Ts + r * d1);
    s.y.push_back(p.CAs + r * d0);
  }
  return s;
}

}  // namespace

PreparedData prepare_data(const LabeledDataset& raw, const ExperimentConfig& cfg) {
  const DataSplits sp = split_dataset(raw, cfg.train.split, cfg.seeds.split);
  PreparedData d;
  d.scaler = fit_scaler(sp.train);
  d.train = d.scaler.scale(sp.train);
  d.validation = d.scaler.scale(sp.validation);
  d.test = d.scaler.scale(sp.test);
  return d;
}

TrainResult train_network(const PreparedData& data, const std::vector<std::size_t>& hidden,
                          bool lcnn, double noise_sd, const ExperimentConfig& cfg) {
  std::mt19937_64 rng(cfg.seeds.init);
  const std::size_t in = data.train.inputs.cols(), out = data.train.outputs.cols();
  const Network init =
      lcnn ? make_lcnn(in, hidden, out, rng) : make_dense_relu(in, hidden, out, rng);
  const LabeledDataset tr = add_noise(data.train, noise_sd, cfg.seeds.noise);
  const LabeledDataset va = add_noise(data.validation, noise_sd, cfg.seeds.noise + 1);
  TrainConfig tc = cfg.train;
  tc.noise_sd = noise_sd;
  tc.seed = cfg.seeds.train;
  return train(init, tr, va, tc);
}

void cmd_generate(const ExperimentConfig& cfg) {
  cfg.validate();
  const Plant plant = load_plant(cfg);
  fs::create_directories(cfg.out_dir);
  io::write_file_atomic(cfg.out_dir / files::kProcess,
                        process_config_to_json(plant.process, plant.spec));
  const LabeledDataset ds =
      generate_dataset(plant.process, plant.spec, {cfg.samples, cfg.seeds.data});
  io::write_file_atomic(cfg.out_dir / files::kDataset, dataset_text(ds, cfg, cfg.samples));
  const LabeledDataset tds =
      generate_dataset(plant.process, plant.spec, {cfg.table_samples, cfg.seeds.data});
  io::write_file_atomic(cfg.out_dir / files::kTableDataset,
                        dataset_text(tds, cfg, cfg.table_samples));
  write_manifest(cfg, "generate", {}, {files::kProcess, files::kDataset, files::kTableDataset});
}

TrainResult cmd_train(const ExperimentConfig& cfg) {
  cfg.validate();
  const PreparedData data = prepare_data(load_dataset(require(cfg, files::kDataset, "generate")), cfg);
  TrainResult r = train_network(data, cfg.model_hidden, true, 0.0, cfg);
  save_model(cfg.out_dir / files::kModel, {r.net, data.scaler});
  std::ostringstream hist, scaler;
  write_history_csv(hist, r.history);
  write_scaler_csv(scaler, data.scaler);
  io::write_file_atomic(cfg.out_dir / files::kHistory, hist.str());
  io::write_file_atomic(cfg.out_dir / files::kScaler, scaler.str());
  const json report{{"hidden", cfg.model_hidden},
                    {"train_samples", data.train.size()},
                    {"best_epoch", r.best_epoch},
                    {"epochs_run", r.history.size()},
                    {"best_val_mse", r.best_val_mse},
                    {"train_mse", evaluate_mse(r.net, data.train)},
                    {"test_mse", evaluate_mse(r.net, data.test)}};
  io::write_file_atomic(cfg.out_dir / files::kTrainReport, report.dump(2) + "\n");
  write_manifest(cfg, "train", {files::kDataset},
                 {files::kModel, files::kHistory, files::kScaler, files::kTrainReport});
  return r;
}

LipschitzCertificate cmd_certify(const ExperimentConfig& cfg) {
  cfg.validate();
  const StoredModel m = load_model(require(cfg, files::kModel, "train"));
  if (!m.scaler) throw ValidationError("model.json carries no scaler; retrain with `lcnn train`");
  const Plant plant = load_plant(cfg);
  const Box domain = scaled_domain(plant, *m.scaler);
  const LipschitzCertificate c = certify_network(m.net, domain, cfg);
  json j = certificate_json(c);
  j["spectral_product"] = spectral_product_bound(m.net);
  j["domain"] = {{"lo", domain.lo}, {"hi", domain.hi}};
  io::write_file_atomic(cfg.out_dir / files::kCertificate, j.dump(2) + "\n");
  write_manifest(cfg, "certify", {files::kModel}, {files::kCertificate});
  return c;
}

void cmd_bounds(const ExperimentConfig& cfg) {
  cfg.validate();
  const StoredModel m = load_model(require(cfg, files::kModel, "train"));
  if (!m.scaler) throw ValidationError("model.json carries no scaler; retrain with `lcnn train`");
  const PreparedData data = prepare_data(load_dataset(require(cfg, files::kDataset, "generate")), cfg);

  double B = 0.0, y_max = 0.0;
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    B = std::max(B, norm2(data.train.inputs.row(i)));
    y_max = std::max(y_max, norm2(data.train.outputs.row(i)));
  }
  const double m_count = static_cast<double>(data.train.size());
  const double L = lipschitz_upper_bound(m.net);
  const Vector zero(m.net.input_dim(), 0.0);
  // ‖ŷ − y‖ ≤ ‖f(0)‖ + L·B + max‖y‖ on the sample domain.
  const double diff_max = norm2(forward(m.net, zero)) + L * B + y_max;

  ERCBoundInputs in = erc_inputs_from_network(m.net, B, m_count);
  in.d_y = m.net.output_dim();
  in.L_r = 2.0 * diff_max;
  in.M = diff_max * diff_max;
  in.delta = cfg.bound_delta;
  const double emp = evaluate_mse(m.net, data.train);

  json j{{"B", B},
         {"m", m_count},
         {"depth", in.d},
         {"frobenius_norms", in.R},
         {"lipschitz_upper", L},
         {"loss_lipschitz", in.L_r},
         {"loss_bound", in.M},
         {"delta", in.delta},
         {"empirical_error", emp},
         {"test_error", evaluate_mse(m.net, data.test)},
         {"erc_lcnn", erc_lcnn_bound(in)},
         {"erc_groupsort", erc_groupsort_bound(in)},
         {"erc_dense_comparison", erc_dense_comparison(in)},
         {"generalization_bound", generalization_bound(in, emp)}};
  io::write_file_atomic(cfg.out_dir / files::kBounds, j.dump(2) + "\n");
  write_manifest(cfg, "bounds", {files::kModel, files::kDataset}, {files::kBounds});
}

std::vector<MpcRun> cmd_mpc(const ExperimentConfig& cfg) {
  cfg.validate();
  const StoredModel m = load_model(require(cfg, files::kModel, "train"));
  if (!m.scaler) throw ValidationError("model.json carries no scaler; retrain with `lcnn train`");
  const Plant plant = load_plant(cfg);
  const MPCConfig mc = mpc_config(cfg, plant);
  if (!in_level_set(cfg.x0, plant.spec, plant.spec.rho))
    throw ValidationError("mpc: x0 lies outside the stability region");

  const NetworkModel nn(m.net, *m.scaler);
  const FirstPrinciplesModel fp(plant.process);
  std::vector<MpcRun> runs(2);
  runs[0].name = "lcnn";
  runs[1].name = "first_principles";
  const PredictionModel* models[] = {&nn, &fp};
  for (std::size_t i = 0; i < runs.size(); ++i) {
    runs[i].trace = simulate_closed_loop(*models[i], mc, cfg.x0, cfg.t_end);
    runs[i].stability = analyze_trace(runs[i].trace, plant.spec.rho_nn);
  }

  std::vector<std::string> outputs;
  json summary = json::array();
  for (const MpcRun& r : runs) {
    std::ostringstream os;
    write_trace_csv(os, r.trace, plant.process.params);
    const std::string name = "trace_" + r.name + ".csv";
    io::write_file_atomic(cfg.out_dir / name, os.str());
    outputs.push_back(name);
    summary.push_back({{"model", r.name},
                       {"entered", r.stability.entered},
                       {"entry_time", r.stability.entry_time},
                       {"remained", r.stability.remained},
                       {"max_v_after_entry", r.stability.max_v_after_entry},
                       {"infeasible_steps", r.stability.infeasible_steps},
                       {"halted", r.trace.error}});
  }

  const CSTRParams& p = plant.process.params;
  auto series = [&](const MpcRun& r, auto value, bool inputs) {
    svg::Series s;
    s.label = r.name == "lcnn" ? "LCNN-LMPC" : "first-principles LMPC";
    s.dashed = r.name != "lcnn";
    const std::size_t n = r.trace.rows.size() - (inputs && !r.trace.halted() ? 1 : 0);
    for (std::size_t k = 0; k < n; ++k) {
      s.x.push_back(r.trace.rows[k].t);
      s.y.push_back(value(r.trace.rows[k]));
    }
    return s;
  };
  struct Figure {
    const char* file;
    const char* title;
    const char* y;
    bool log_y;
    bool inputs;
    double (*value)(const TraceRow&, const CSTRParams&);
  };
  const Figure figs[] = {
      {"mpc_lyapunov.svg", "Lyapunov function", "V(x)", true, false,
       [](const TraceRow& r, const CSTRParams&) { return r.V; }},
      {"mpc_concentration.svg", "Reactant concentration", "C_A (kmol/m3)", false, false,
       [](const TraceRow& r, const CSTRParams& q) { return q.CAs + r.x[0]; }},
      {"mpc_temperature.svg", "Reactor temperature", "T (K)", false, false,
       [](const TraceRow& r, const CSTRParams& q) { return q.Ts + r.x[1]; }},
      {"mpc_input_ca0.svg", "Feed concentration input", "dC_A0 (kmol/m3)", false, true,
       [](const TraceRow& r, const CSTRParams&) { return r.u[0]; }},
      {"mpc_input_q.svg", "Heat input", "Q (kJ/h)", false, true,
       [](const TraceRow& r, const CSTRParams&) { return r.u[1]; }},
  };
  for (const Figure& f : figs) {
    svg::Plot plot{f.title, "t (h)", f.y, {}, f.log_y};
    for (const MpcRun& r : runs)
      plot.series.push_back(
          series(r, [&](const TraceRow& row) { return f.value(row, p); }, f.inputs));
    io::write_file_atomic(cfg.out_dir / f.file, svg::render(plot));
    outputs.push_back(f.file);
  }
  svg::Plot phase{"State space", "T (K)", "C_A (kmol/m3)", {}};
  phase.series.push_back(ellipse(plant.spec, plant.spec.rho, "", p));
  phase.series.push_back(ellipse(plant.spec, plant.spec.rho_nn, "", p));
  for (const MpcRun& r : runs) {
    svg::Series s;
    s.label = r.name == "lcnn" ? "LCNN-LMPC" : "first-principles LMPC";
    s.color = r.name == "lcnn" ? "#1f77b4" : "#d62728";
    for (const TraceRow& row : r.trace.rows) {
      s.x.push_back(p.Ts + row.x[1]);
      s.y.push_back(p.CAs + row.x[0]);
    }
    phase.series.push_back(std::move(s));
  }
  io::write_file_atomic(cfg.out_dir / "mpc_phase.svg", svg::render(phase));
  outputs.push_back("mpc_phase.svg");

  io::write_file_atomic(cfg.out_dir / files::kMpcSummary, summary.dump(2) + "\n");
  outputs.push_back(files::kMpcSummary);
  write_manifest(cfg, "mpc", {files::kModel}, outputs);
  return runs;
}

std::vector<Table1Row> cmd_table1(const ExperimentConfig& cfg) {
  cfg.validate();
  const PreparedData data =
      prepare_data(load_dataset(require(cfg, files::kTableDataset, "generate")), cfg);
  const auto cs = cells(cfg);
  fs::create_directories(cfg.out_dir / "models");
  // Each job is one network; even jobs are LCNNs, odd jobs the Dense twin.
  const auto results = run_cells(2 * cs.size(), [&](std::size_t job) {
    const auto& [hidden, sd] = cs[job / 2];
    const bool lcnn = job % 2 == 0;
    const TrainResult r = train_network(data, hidden, lcnn, sd, cfg);
    save_model(cfg.out_dir / "models" / cell_model_name(hidden, sd, lcnn), {r.net, data.scaler});
    return evaluate_mse(r.net, data.test);
  });

  std::vector<Table1Row> rows;
  std::ostringstream os;
  os << "hidden,noise_sd,lcnn_test_mse,dense_test_mse,improvement_factor\n";
  std::vector<std::string> outputs{files::kTable1};
  for (std::size_t i = 0; i < cs.size(); ++i) {
    Table1Row r{cs[i].first, cs[i].second, results[2 * i], results[2 * i + 1]};
    os << '"' << hidden_label(r.hidden) << "\"," << json_double(r.noise_sd) << ','
       << json_double(r.lcnn_test_mse) << ',' << json_double(r.dense_test_mse) << ','
       << json_double(r.improvement()) << '\n';
    outputs.push_back("models/" + cell_model_name(r.hidden, r.noise_sd, true));
    outputs.push_back("models/" + cell_model_name(r.hidden, r.noise_sd, false));
    rows.push_back(std::move(r));
  }
  io::write_file_atomic(cfg.out_dir / files::kTable1, os.str());
  write_manifest(cfg, "table1", {files::kTableDataset}, outputs);
  return rows;
}

std::vector<Table2Row> cmd_table2(const ExperimentConfig& cfg) {
  cfg.validate();
  const Plant plant = load_plant(cfg);
  const auto cs = cells(cfg);
  std::vector<std::string> inputs;
  for (const auto& [hidden, sd] : cs)
    for (bool lcnn : {true, false}) {
      const std::string name = "models/" + cell_model_name(hidden, sd, lcnn);
      require(cfg, name.c_str(), "table1");
      inputs.push_back(name);
    }
  const auto certs = run_cells(2 * cs.size(), [&](std::size_t job) {
    const StoredModel m = load_model(cfg.out_dir / inputs[job]);
    if (!m.scaler) throw ValidationError(inputs[job] + " carries no scaler");
    return certify_network(m.net, scaled_domain(plant, *m.scaler), cfg);
  });

  std::vector<Table2Row> rows;
  std::ostringstream os;
  os << "hidden,noise_sd,dense_lipschitz,dense_lower,dense_tight,lcnn_lipschitz,lcnn_lower,"
        "ratio\n";
  for (std::size_t i = 0; i < cs.size(); ++i) {
    Table2Row r{cs[i].first, cs[i].second, certs[2 * i + 1], certs[2 * i]};
    os << '"' << hidden_label(r.hidden) << "\"," << json_double(r.noise_sd) << ','
       << json_double(r.dense.upper) << ',' << json_double(r.dense.lower) << ','
       << (r.dense.tight ? 1 : 0) << ',' << json_double(r.lcnn.upper) << ','
       << json_double(r.lcnn.lower) << ',' << json_double(r.ratio()) << '\n';
    rows.push_back(std::move(r));
  }
  io::write_file_atomic(cfg.out_dir / files::kTable2, os.str());
  write_manifest(cfg, "table2", inputs, {files::kTable2});
  return rows;
}

std::vector<PhiCheckRow> phi_check(const Plant& plant, std::size_t n_starts, double t_limit,
                                   std::uint64_t seed) {
  if (!(t_limit >= 0.0)) throw ValidationError("phi check: time limit must be non-negative");
  const State2 hw = level_set_half_widths(plant.spec, plant.spec.rho);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const auto steps = static_cast<std::size_t>(std::llround(t_limit / plant.process.delta));
  std::vector<PhiCheckRow> rows;
  while (rows.size() < n_starts) {
    const State2 x0{unit(rng) * hw[0], unit(rng) * hw[1]};
    if (!in_level_set(x0, plant.spec, plant.spec.rho)) continue;
    PhiCheckRow row{x0};
    State2 x = x0;
    for (std::size_t k = 0; k <= steps; ++k) {
      if (lyapunov_value(x, plant.spec) < plant.spec.rho_nn) {
        row.reach_time = static_cast<double>(k) * plant.process.delta;
        break;
      }
      if (k == steps) break;
      x = step_sample_hold(x, phi_controller(x, plant.process, plant.spec), plant.process);
    }
    row.final_v = lyapunov_value(x, plant.spec);
    rows.push_back(row);
  }
  return rows;
}

std::vector<PhiCheckRow> cmd_phi_check(const ExperimentConfig& cfg, std::size_t n_starts,
                                       double t_limit) {
  cfg.validate();
  const Plant plant = load_plant(cfg);
  const auto rows = phi_check(plant, n_starts, t_limit, cfg.seeds.data);
  std::ostringstream os;
  os << "dCA_0,dT_0,reach_time,final_V\n";
  for (const PhiCheckRow& r : rows)
    os << json_double(r.x0[0]) << ',' << json_double(r.x0[1]) << ','
       << json_double(r.reach_time) << ',' << json_double(r.final_v) << '\n';
  fs::create_directories(cfg.out_dir);
  io::write_file_atomic(cfg.out_dir / files::kPhiCheck, os.str());
  write_manifest(cfg, "phi_check", {}, {files::kPhiCheck});
  return rows;
}

}  // namespace lcnn::exp
