#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "lcnn/model_io.hpp"
#include "lcnn/training.hpp"
#include "oracles.hpp"

using namespace lcnn;

namespace {

LabeledDataset linear_data(std::size_t n, const Matrix& A, std::mt19937_64& rng) {
  LabeledDataset ds{oracle::random_matrix(n, A.cols(), rng), Matrix(n, A.rows())};
  ds.outputs = oracle::naive_matmul(ds.inputs, A.transpose());
  return ds;
}

}  // namespace

TEST(Scaler, StandardisesWithPopulationStd) {
  LabeledDataset ds{Matrix{{1, 10}, {3, 10.5}, {5, 11}}, Matrix{{0}, {2}, {4}}};
  const ScalerParams s = fit_scaler(ds);
  EXPECT_DOUBLE_EQ(s.in_mean[0], 3.0);
  EXPECT_NEAR(s.in_std[0], std::sqrt(8.0 / 3.0), 1e-15);
  const LabeledDataset z = s.scale(ds);
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0, v = 0;
    for (std::size_t r = 0; r < 3; ++r) m += z.inputs(r, c) / 3;
    for (std::size_t r = 0; r < 3; ++r) v += (z.inputs(r, c) - m) * (z.inputs(r, c) - m) / 3;
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v, 1.0, 1e-12);
  }
  EXPECT_LE(max_abs_diff(s.unscale(z).inputs, ds.inputs), 1e-12);
}

TEST(Scaler, ConstantFeatureIsRejected) {
  LabeledDataset ds{Matrix{{1, 2}, {1, 3}}, Matrix{{0}, {1}}};
  EXPECT_THROW(fit_scaler(ds), ValidationError);
}

TEST(Noise, ZeroIsIdentityAndSeedsRepeat) {
  std::mt19937_64 rng(1);
  const LabeledDataset ds{oracle::random_matrix(50, 2, rng), oracle::random_matrix(50, 2, rng)};
  EXPECT_EQ(add_noise(ds, 0.0, 3).outputs, ds.outputs);
  EXPECT_EQ(add_noise(ds, 0.1, 3).outputs, add_noise(ds, 0.1, 3).outputs);
  EXPECT_NE(add_noise(ds, 0.1, 3).outputs, add_noise(ds, 0.1, 4).outputs);
  EXPECT_EQ(add_noise(ds, 0.1, 3).inputs, ds.inputs);
  EXPECT_THROW(add_noise(ds, -1.0, 3), ValidationError);
}

TEST(Noise, SampleStdMatches) {
  LabeledDataset ds{Matrix(20000, 1), Matrix(20000, 1)};
  const LabeledDataset n = add_noise(ds, 0.2, 9);
  double s = 0;
  for (double v : n.outputs.data()) s += v * v;
  EXPECT_NEAR(std::sqrt(s / 20000), 0.2, 0.005);
}

TEST(Split, FractionsAndDisjointness) {
  LabeledDataset ds{Matrix(1000, 1), Matrix(1000, 1)};
  for (std::size_t i = 0; i < 1000; ++i) ds.inputs(i, 0) = static_cast<double>(i);
  const DataSplits sp = split_dataset(ds, {}, 5);
  EXPECT_EQ(sp.train.size(), 525u);
  EXPECT_EQ(sp.validation.size(), 175u);
  EXPECT_EQ(sp.test.size(), 300u);
  std::vector<int> seen(1000, 0);
  for (const auto* s : {&sp.train, &sp.validation, &sp.test})
    for (std::size_t i = 0; i < s->size(); ++i) ++seen[static_cast<int>(s->inputs(i, 0))];
  for (int c : seen) EXPECT_EQ(c, 1);
  EXPECT_THROW(split_dataset(ds, {0.5, 0.5, 0.5}, 5), ValidationError);
}

TEST(Train, LinearMapReachesLeastSquaresOptimum) {
  std::mt19937_64 rng(2);
  const Matrix A = oracle::random_matrix(2, 3, rng);
  const LabeledDataset tr = linear_data(400, A, rng), va = linear_data(100, A, rng);
  Network net;
  net.layers.push_back({LayerKind::LinearFree, Matrix(2, 3), Vector(2, 0.0)});
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 50;
  cfg.max_epochs = 400;
  cfg.patience = 400;
  const TrainResult r = train(net, tr, va, cfg);
  EXPECT_LT(evaluate_mse(r.net, tr), 1e-8);
  EXPECT_LE(max_abs_diff(r.net.layers[0].weight, A), 1e-4);
}

TEST(Train, ZeroEpochsReturnsInitialNetwork) {
  std::mt19937_64 rng(3);
  const std::size_t hidden[] = {4};
  const Network net = make_lcnn(3, hidden, 2, rng);
  const LabeledDataset tr = linear_data(20, oracle::random_matrix(2, 3, rng), rng);
  TrainConfig cfg;
  cfg.max_epochs = 0;
  const TrainResult r = train(net, tr, tr, cfg);
  EXPECT_EQ(r.net, net);
  EXPECT_EQ(r.best_epoch, 0u);
  EXPECT_TRUE(r.history.empty());
}

TEST(Train, DeterministicAndConstraintsHold) {
  std::mt19937_64 rng(4);
  const std::size_t hidden[] = {8, 8};
  Network net = make_lcnn(3, hidden, 2, rng);
  const LabeledDataset tr = linear_data(200, oracle::random_matrix(2, 3, rng), rng);
  TrainConfig cfg;
  cfg.max_epochs = 15;
  cfg.batch_size = 32;
  cfg.seed = 7;
  const TrainResult a = train(net, tr, tr, cfg), b = train(net, tr, tr, cfg);
  EXPECT_EQ(a.net, b.net);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i)
    EXPECT_EQ(a.history[i].val_mse, b.history[i].val_mse);
  for (std::size_t i = 0; i + 1 < a.net.depth(); ++i)
    EXPECT_NEAR(oracle::sigma_max(a.net.layers[i].weight), 1.0, 1e-6);
  for (double w : a.net.layers.back().weight.data()) EXPECT_LE(std::abs(w), a.net.clip);
  EXPECT_LE(a.best_val_mse, evaluate_mse(net, tr));
}

TEST(Train, EarlyStoppingKeepsBestValidation) {
  std::mt19937_64 rng(5);
  const std::size_t hidden[] = {8};
  const Network net = make_dense_relu(3, hidden, 2, rng);
  const LabeledDataset tr = linear_data(100, oracle::random_matrix(2, 3, rng), rng);
  const LabeledDataset va = add_noise(tr, 1.0, 1);
  TrainConfig cfg;
  cfg.max_epochs = 200;
  cfg.patience = 3;
  const TrainResult r = train(net, tr, va, cfg);
  double best = evaluate_mse(net, va);
  for (const auto& e : r.history) best = std::min(best, e.val_mse);
  EXPECT_DOUBLE_EQ(r.best_val_mse, best);
  EXPECT_DOUBLE_EQ(evaluate_mse(r.net, va), best);
  EXPECT_LE(r.history.size(), r.best_epoch + cfg.patience);
}

TEST(Train, NonFiniteLossRaisesNumericalError) {
  Network net;
  net.layers.push_back({LayerKind::LinearFree, Matrix{{1e200}}, Vector{0.0}});
  LabeledDataset ds{Matrix{{1e200}, {2e200}}, Matrix{{0.0}, {0.0}}};
  TrainConfig cfg;
  cfg.max_epochs = 2;
  EXPECT_THROW(train(net, ds, ds, cfg), NumericalError);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.beta1 = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Csv, DatasetScalerAndHistoryRoundTrip) {
  std::mt19937_64 rng(6);
  const LabeledDataset ds{oracle::random_matrix(5, 4, rng), oracle::random_matrix(5, 2, rng)};
  std::stringstream ss;
  write_dataset_csv(ss, ds, {"a", "b", "c", "d", "e", "f"}, {"seed=1"});
  EXPECT_EQ(ss.str().rfind("# seed=1", 0), 0u);
  const LabeledDataset back = read_dataset_csv(ss, 4);
  EXPECT_EQ(back.inputs, ds.inputs);
  EXPECT_EQ(back.outputs, ds.outputs);

  const ScalerParams s = fit_scaler(ds);
  std::stringstream sc;
  write_scaler_csv(sc, s);
  const ScalerParams s2 = read_scaler_csv(sc);
  EXPECT_EQ(s2.in_mean, s.in_mean);
  EXPECT_EQ(s2.out_std, s.out_std);

  std::stringstream h;
  write_history_csv(h, {{1, 0.5, 0.25}});
  EXPECT_EQ(h.str(), "epoch,train_mse,val_mse\n1,0.5,0.25\n");
}

TEST(Csv, MalformedInputIsRejected) {
  std::stringstream ss("a,b\n1,notanumber\n");
  EXPECT_THROW(read_dataset_csv(ss, 1), ValidationError);
}

TEST(ModelIo, RoundTripIsBitExact) {
  std::mt19937_64 rng(7);
  const std::size_t hidden[] = {6, 4};
  const LabeledDataset ds{oracle::random_matrix(10, 3, rng), oracle::random_matrix(10, 2, rng)};
  for (const Network& net : {make_lcnn(3, hidden, 2, rng), make_dense_relu(3, hidden, 2, rng)}) {
    const StoredModel m{net, fit_scaler(ds)};
    const StoredModel back = model_from_json(model_to_json(m));
    EXPECT_EQ(back.net, net);
    ASSERT_TRUE(back.scaler.has_value());
    EXPECT_EQ(back.scaler->in_std, m.scaler->in_std);
  }
}

TEST(ModelIo, RejectsWrongFormatAndShapes) {
  EXPECT_THROW(model_from_json("{}"), ValidationError);
  EXPECT_THROW(model_from_json("not json"), ValidationError);
  EXPECT_THROW(model_from_json(R"({"format":"lcnn-model","version":99,"layers":[]})"),
               ValidationError);
  EXPECT_THROW(
      model_from_json(
          R"({"format":"lcnn-model","version":1,"clip":1,"layers":[{"kind":"LinearFree","in_dim":2,"out_dim":1,"weight":[1],"bias":[0]}]})"),
      ValidationError);
}
