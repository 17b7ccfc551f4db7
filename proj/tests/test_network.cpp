#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "lcnn/network.hpp"
#include "oracles.hpp"

using namespace lcnn;

TEST(GroupSort, SortsPairsDescending) {
  EXPECT_EQ(group_sort(Vector{1, 2, 5, 3}), (Vector{2, 1, 5, 3}));
  EXPECT_EQ(group_sort(Vector{-1, -1}), (Vector{-1, -1}));
  EXPECT_EQ(group_sort(Vector{1, 2, 3}), (Vector{2, 1, 3}));
  EXPECT_EQ(group_sort(Vector{1, 1, 7}), (Vector{1, 1, 7}));
}

TEST(GroupSort, IsPermutationAndOneLipschitz) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 10000; ++t) {
    const std::size_t n = 1 + rng() % 12;
    const Vector x = oracle::random_vector(n, rng, -3, 3), y = oracle::random_vector(n, rng, -3, 3);
    const Vector gx = group_sort(x), gy = group_sort(y);
    Vector sx = x, sg = gx;
    std::sort(sx.begin(), sx.end());
    std::sort(sg.begin(), sg.end());
    ASSERT_EQ(sx, sg);
    ASSERT_LE(oracle::norm(oracle::diff(gx, gy)), oracle::norm(oracle::diff(x, y)) * (1 + 1e-12));
  }
}

TEST(Network, ForwardMatchesOracle) {
  std::mt19937_64 rng(2);
  const std::size_t hidden[] = {6, 4};
  for (const Network& net : {make_lcnn(3, hidden, 2, rng), make_dense_relu(3, hidden, 2, rng)}) {
    for (int t = 0; t < 50; ++t) {
      const Vector x = oracle::random_vector(3, rng, -2, 2);
      const Vector a = forward(net, x), b = oracle::forward(net, x);
      for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
    }
  }
}

TEST(Network, BatchForwardMatchesRows) {
  std::mt19937_64 rng(3);
  const std::size_t hidden[] = {8};
  const Network net = make_lcnn(4, hidden, 3, rng);
  const Matrix x = oracle::random_matrix(7, 4, rng);
  const Matrix y = forward_batch(net, x);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const Vector yr = forward(net, x.row(r));
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(y(r, c), yr[c], 1e-12);
  }
}

TEST(Network, ValidateRejectsBadShapes) {
  Network net;
  EXPECT_THROW(net.validate(), ValidationError);
  net.layers.push_back({LayerKind::SpectralDense, Matrix(3, 2), Vector(3)});
  net.layers.push_back({LayerKind::LinearClipped, Matrix(1, 2), Vector(1)});
  EXPECT_THROW(net.validate(), ValidationError);  // layer 1 expects 2 inputs
  net.layers[0] = {LayerKind::SpectralDense, Matrix(4, 2), Vector(3)};  // bias size
  EXPECT_THROW(net.validate(), ValidationError);
  net.layers[0] = {LayerKind::SpectralDense, Matrix(4, 2), Vector(4)};
  EXPECT_THROW(net.validate(), ValidationError);  // next layer expects 3 inputs
  net.layers[1] = {LayerKind::LinearClipped, Matrix(1, 4), Vector(1)};
  EXPECT_NO_THROW(net.validate());
  EXPECT_TRUE(net.is_lcnn());
}

TEST(Network, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  const std::size_t hidden[] = {10, 6};
  for (const Network& net : {make_lcnn(4, hidden, 2, rng), make_dense_relu(4, hidden, 2, rng)}) {
    for (int t = 0; t < 20; ++t) {
      const Vector x = oracle::random_vector(4, rng);
      const auto [y, j] = forward_with_jacobian(net, x);
      EXPECT_LE(max_abs_diff(j, jacobian(net, x)), 1e-12);
      for (std::size_t c = 0; c < 4; ++c) {
        Vector xp = x, xm = x;
        xp[c] += 1e-7;
        xm[c] -= 1e-7;
        const Vector fp = oracle::forward(net, xp), fm = oracle::forward(net, xm);
        for (std::size_t r = 0; r < 2; ++r)
          EXPECT_NEAR(j(r, c), (fp[r] - fm[r]) / 2e-7, 1e-5);
      }
    }
  }
}

TEST(Network, ProjectionGivesUnitSpectralNorm) {
  std::mt19937_64 rng(5);
  const std::size_t hidden[] = {12, 12};
  Network net = make_lcnn(4, hidden, 2, rng);
  for (Layer& l : net.layers)
    for (double& w : l.weight.data()) w *= 3.0;
  const Network p = project_spectral(net);
  for (std::size_t i = 0; i + 1 < p.depth(); ++i)
    EXPECT_NEAR(oracle::sigma_max(p.layers[i].weight), 1.0, 1e-6);
  for (double w : p.layers.back().weight.data()) EXPECT_LE(std::abs(w), p.clip);
}

TEST(Network, ProjectedLcnnRespectsItsBound) {
  std::mt19937_64 rng(6);
  const std::size_t hidden[] = {16, 16};
  Network net = make_lcnn(4, hidden, 2, rng);
  for (double& w : net.layers.back().weight.data()) w *= 4.0;
  net = project_spectral(net);
  const double L = lipschitz_upper_bound(net);
  EXPECT_NEAR(L, oracle::sigma_max(net.layers.back().weight), 1e-6);
  for (int t = 0; t < 10000; ++t) {
    const Vector x = oracle::random_vector(4, rng, -3, 3), y = oracle::random_vector(4, rng, -3, 3);
    const double lhs = oracle::norm(oracle::diff(forward(net, x), forward(net, y)));
    ASSERT_LE(lhs, L * oracle::norm(oracle::diff(x, y)) * (1 + 1e-9) + 1e-12);
  }
}

TEST(Network, SpectralProductBoundsDenseNets) {
  std::mt19937_64 rng(7);
  const std::size_t hidden[] = {8, 8};
  const Network net = make_dense_relu(3, hidden, 2, rng);
  double prod = 1.0;
  for (const Layer& l : net.layers) prod *= oracle::sigma_max(l.weight);
  EXPECT_NEAR(spectral_product_bound(net), prod, 1e-6 * prod);
  Box dom{{-1, -1, -1}, {1, 1, 1}};
  EXPECT_LE(empirical_lipschitz_lower(net, dom, 500, 1), prod);
}

TEST(Network, EmpiricalLowerIsDeterministicAndBelowBound) {
  std::mt19937_64 rng(8);
  const std::size_t hidden[] = {8};
  const Network net = make_lcnn(2, hidden, 1, rng);
  Box dom{{-1, -1}, {1, 1}};
  const double a = empirical_lipschitz_lower(net, dom, 300, 4);
  EXPECT_EQ(a, empirical_lipschitz_lower(net, dom, 300, 4));
  EXPECT_LE(a, lipschitz_upper_bound(net) + 1e-12);
  EXPECT_GT(a, 0.0);
}

TEST(Network, IntervalBoundsEnclosePreactivations) {
  std::mt19937_64 rng(9);
  const std::size_t hidden[] = {6, 6};
  for (const Network& net : {make_lcnn(3, hidden, 2, rng), make_dense_relu(3, hidden, 2, rng)}) {
    Box dom{{-1, 0, 0.5}, {0, 2, 1}};
    const auto b = interval_preactivations(net, dom);
    ASSERT_EQ(b.size(), net.depth());
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 500; ++t) {
      Vector a(3);
      for (std::size_t i = 0; i < 3; ++i) a[i] = dom.lo[i] + u(rng) * (dom.hi[i] - dom.lo[i]);
      for (std::size_t k = 0; k < net.depth(); ++k) {
        const Layer& l = net.layers[k];
        Vector z = matvec(l.weight, a);
        for (std::size_t r = 0; r < z.size(); ++r) {
          z[r] += l.bias[r];
          ASSERT_GE(z[r], b[k].lo[r] - 1e-12);
          ASSERT_LE(z[r], b[k].hi[r] + 1e-12);
        }
        if (l.kind == LayerKind::SpectralDense) z = group_sort(z);
        if (l.kind == LayerKind::DenseReLU)
          for (double& v : z) v = std::max(0.0, v);
        a = std::move(z);
      }
    }
  }
}

TEST(Network, ConstructorsAreSeeded) {
  std::mt19937_64 a(11), b(11);
  const std::size_t hidden[] = {4};
  EXPECT_EQ(make_lcnn(2, hidden, 1, a), make_lcnn(2, hidden, 1, b));
  const Network odd = make_lcnn(2, std::vector<std::size_t>{3}, 1, a);
  EXPECT_EQ(odd.layers[0].weight.rows(), 3u);
  EXPECT_NEAR(oracle::sigma_max(odd.layers[0].weight), 1.0, 1e-6);
}

TEST(LayerKind, StringRoundTrip) {
  for (LayerKind k : {LayerKind::SpectralDense, LayerKind::DenseReLU, LayerKind::LinearClipped,
                      LayerKind::LinearFree})
    EXPECT_EQ(layer_kind_from_string(to_string(k)), k);
  EXPECT_THROW(layer_kind_from_string("conv"), ValidationError);
}
