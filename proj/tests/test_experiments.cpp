#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "json.hpp"
#include "lcnn/experiments.hpp"
#include "lcnn/io.hpp"
#include "lcnn/svg.hpp"

using namespace lcnn;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lcnn_test_" + name);
  fs::remove_all(p);
  return p;
}

exp::ExperimentConfig tiny_config(const fs::path& out) {
  exp::ExperimentConfig cfg = exp::preset_config("desk");
  cfg.out_dir = out;
  cfg.samples = 300;
  cfg.table_samples = 200;
  cfg.model_hidden = {6, 6};
  cfg.architectures = {{4, 4}};
  cfg.noise_sds = {0.1};
  cfg.train.max_epochs = 3;
  cfg.lipschitz_samples = 50;
  cfg.t_end = 0.003;
  return cfg;
}

}  // namespace

TEST(Config, PresetsDiffer) {
  const auto desk = exp::preset_config("desk"), paper = exp::preset_config("paper");
  EXPECT_EQ(desk.samples, 20000u);
  EXPECT_LT(desk.table_samples, paper.table_samples);
  EXPECT_NE(exp::config_hash(desk), exp::config_hash(paper));
  EXPECT_THROW(exp::preset_config("huge"), ValidationError);
}

TEST(Config, ParseOverridesAndRoundTrips) {
  const auto cfg = exp::parse_experiment_config(
      R"({"preset":"desk","samples":123,"noise_sds":[0.3],"train":{"max_epochs":4},
          "mpc":{"x0":[1.0,-2.0]},"seeds":{"data":42},"out_dir":"out"})",
      "/base");
  EXPECT_EQ(cfg.samples, 123u);
  EXPECT_EQ(cfg.noise_sds, std::vector<double>{0.3});
  EXPECT_EQ(cfg.train.max_epochs, 4u);
  EXPECT_EQ(cfg.x0, (State2{1.0, -2.0}));
  EXPECT_EQ(cfg.seeds.data, 42u);
  EXPECT_EQ(cfg.out_dir, fs::path("/base/out"));
  EXPECT_EQ(exp::parse_experiment_config("{}", "/base").out_dir, fs::path("runs/desk"));
  const auto back = exp::parse_experiment_config(exp::experiment_config_to_json(cfg), "/elsewhere");
  EXPECT_EQ(exp::config_hash(back), exp::config_hash(cfg));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(exp::parse_experiment_config(R"({"sampels":10})"), ValidationError);
  EXPECT_THROW(exp::parse_experiment_config(R"({"train":{"lr":1}})"), ValidationError);
  EXPECT_THROW(exp::parse_experiment_config(R"({"samples":-5})"), ValidationError);
  EXPECT_THROW(exp::parse_experiment_config(R"({"noise_sds":[]})"), ValidationError);
  EXPECT_THROW(exp::parse_experiment_config("{not json"), ValidationError);
  EXPECT_THROW(exp::load_experiment_config("/nonexistent/config.json"), ValidationError);
}

TEST(Config, SeedsFromBase) {
  const exp::Seeds s = exp::Seeds::from_base(100);
  EXPECT_EQ(s.data, 100u);
  EXPECT_EQ(s.split, 101u);
  EXPECT_EQ(s.lipschitz, 105u);
}

TEST(Pipeline, MissingPrerequisiteNamesProducer) {
  const auto cfg = tiny_config(fresh_dir("missing"));
  try {
    exp::cmd_train(cfg);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("lcnn generate"), std::string::npos) << e.what();
  }
}

TEST(Pipeline, GenerateIsByteIdenticalAcrossRuns) {
  const auto cfg = tiny_config(fresh_dir("generate"));
  exp::cmd_generate(cfg);
  const std::string a = io::read_file(cfg.out_dir / exp::files::kDataset);
  const std::string m = io::read_file(cfg.out_dir / "manifest_generate.json");
  exp::cmd_generate(cfg);
  EXPECT_EQ(io::read_file(cfg.out_dir / exp::files::kDataset), a);
  EXPECT_EQ(io::read_file(cfg.out_dir / "manifest_generate.json"), m);
  auto other = cfg;
  other.seeds.data += 1;
  exp::cmd_generate(other);
  EXPECT_NE(io::read_file(cfg.out_dir / exp::files::kDataset), a);
}

TEST(Pipeline, EndToEndProducesArtifactsWithManifests) {
  const auto cfg = tiny_config(fresh_dir("pipeline"));
  exp::cmd_generate(cfg);
  exp::cmd_train(cfg);
  const LipschitzCertificate cert = exp::cmd_certify(cfg);
  EXPECT_GE(cert.upper, cert.lower);
  exp::cmd_bounds(cfg);
  const auto runs = exp::cmd_mpc(cfg);
  ASSERT_EQ(runs.size(), 2u);
  for (const auto& r : runs) EXPECT_EQ(r.trace.rows.size(), 4u);
  const auto t1 = exp::cmd_table1(cfg);
  ASSERT_EQ(t1.size(), 1u);
  EXPECT_GT(t1[0].lcnn_test_mse, 0.0);
  const auto t2 = exp::cmd_table2(cfg);
  ASSERT_EQ(t2.size(), 1u);
  EXPECT_GE(t2[0].dense.upper, t2[0].dense.lower);

  for (const char* f : {exp::files::kModel, exp::files::kHistory, exp::files::kCertificate,
                        exp::files::kBounds, exp::files::kMpcSummary, exp::files::kTable1,
                        exp::files::kTable2, "trace_lcnn.csv", "mpc_lyapunov.svg"})
    EXPECT_TRUE(fs::exists(cfg.out_dir / f)) << f;

  const auto m = nlohmann::json::parse(io::read_file(cfg.out_dir / "manifest_train.json"));
  EXPECT_EQ(m["command"], "train");
  EXPECT_EQ(m["config_hash"], exp::config_hash(cfg));
  for (const auto& o : m["outputs"]) {
    const std::string body = io::read_file(cfg.out_dir / o["file"].get<std::string>());
    EXPECT_EQ(o["fnv1a"], io::hex64(io::fnv1a64(body)));
  }
  EXPECT_EQ(io::read_file(cfg.out_dir / exp::files::kHistory).rfind("epoch,train_mse,val_mse\n", 0),
            0u);
}

TEST(Svg, RendersSeriesAndRejectsBadInput) {
  svg::Plot p;
  p.title = "t";
  p.series.push_back({"a", {0, 1, 2, 3}, {1, 2, NAN, 4}, "", false});
  p.series.push_back({"b", {0, 1}, {3, 3}, "#000000", true});
  const std::string s = svg::render(p);
  EXPECT_EQ(s.rfind("<svg", 0) == 0 || s.rfind("<?xml", 0) == 0, true);
  EXPECT_NE(s.find("</svg>"), std::string::npos);
  std::size_t polylines = 0;
  for (std::size_t pos = 0; (pos = s.find("<polyline", pos)) != std::string::npos; ++pos) ++polylines;
  EXPECT_EQ(polylines, 3u);
  p.series[0].y.pop_back();
  EXPECT_THROW(svg::render(p), ValidationError);
}

TEST(Svg, NiceTicksAreEvenAndInsideRange) {
  const auto t = svg::nice_ticks(0.13, 9.7);
  ASSERT_GE(t.size(), 3u);
  EXPECT_GE(t.front(), 0.13);
  EXPECT_LE(t.back(), 9.7);
  const double step = t[1] - t[0];
  EXPECT_LE(t.front() - step, 0.13);
  EXPECT_GE(t.back() + step, 9.7);
  for (std::size_t i = 2; i < t.size(); ++i) EXPECT_NEAR(t[i] - t[i - 1], step, 1e-12);
  EXPECT_EQ(svg::nice_ticks(1.0, 1.0).size(), 1u);
}
