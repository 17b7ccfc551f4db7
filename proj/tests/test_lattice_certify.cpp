#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lcnn/certify.hpp"
#include "lcnn/lattice.hpp"
#include "oracles.hpp"

using namespace lcnn;

namespace {

Network random_lcnn(std::size_t in, std::mt19937_64& rng) {
  std::vector<std::size_t> hidden(rng() % 4);
  for (auto& w : hidden) w = 1 + rng() % 8;
  return normalize_final_row(make_lcnn(in, hidden, 1, rng));
}

void check_lattice(const Network& f, const Network& g, const Box& dom, std::mt19937_64& rng) {
  const LatticeNetwork hmax = lattice_max(f, g, dom), hmin = lattice_min(f, g, dom);
  EXPECT_GE(1.0 / hmax.c, 1.0 - 1e-12);
  EXPECT_LE(1.0 / hmax.c, std::sqrt(2.0) + 1e-12);
  for (const LatticeNetwork* h : {&hmax, &hmin})
    for (std::size_t i = 0; i + 1 < h->net.depth(); ++i)
      EXPECT_NEAR(oracle::sigma_max(h->net.layers[i].weight), 1.0, 1e-6) << "layer " << i;
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 200; ++t) {
    Vector x(dom.dim());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = dom.lo[i] + u(rng) * (dom.hi[i] - dom.lo[i]);
    const double fx = oracle::forward(f, x)[0], gx = oracle::forward(g, x)[0];
    EXPECT_NEAR(forward(hmax.net, x)[0] / hmax.c, std::max(fx, gx), 1e-9);
    EXPECT_NEAR(forward(hmin.net, x)[0] / hmin.c, std::min(fx, gx), 1e-9);
  }
}

}  // namespace

TEST(Lattice, MaxAndMinOfRandomPairs) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 1 + rng() % 4;
    const Network f = random_lcnn(n, rng), g = random_lcnn(n, rng);
    Box dom{Vector(n, -2.0), Vector(n, 3.0)};
    check_lattice(f, g, dom, rng);
  }
}

TEST(Lattice, NoHiddenLayerAndDepthMismatch) {
  std::mt19937_64 rng(2);
  const Network lin = normalize_final_row(make_lcnn(3, std::vector<std::size_t>{}, 1, rng));
  const std::size_t deep[] = {6, 4, 2};
  const Network d = normalize_final_row(make_lcnn(3, deep, 1, rng));
  Box dom{Vector(3, -1.0), Vector(3, 1.0)};
  check_lattice(lin, d, dom, rng);
  check_lattice(lin, lin, dom, rng);
}

TEST(Lattice, RejectsInvalidInputs) {
  std::mt19937_64 rng(4);
  const std::size_t hidden[] = {4};
  const Network f = normalize_final_row(make_lcnn(2, hidden, 1, rng));
  Box dom{Vector(2, -1.0), Vector(2, 1.0)};
  Network unnormalised = f;
  unnormalised.layers.back().weight *= 2.0;
  EXPECT_THROW(lattice_max(unnormalised, f, dom), ValidationError);
  EXPECT_THROW(lattice_max(make_dense_relu(2, hidden, 1, rng), f, dom), ValidationError);
  EXPECT_THROW(lattice_max(make_lcnn(2, hidden, 2, rng), f, dom), ValidationError);
  const Network other = normalize_final_row(make_lcnn(3, hidden, 1, rng));
  EXPECT_THROW(lattice_max(f, other, dom), ValidationError);
  Network loose = f;
  loose.layers[0].weight *= 0.5;
  EXPECT_THROW(lattice_max(loose, f, dom), ValidationError);
}

TEST(Bab, EqualsPatternEnumerationWhenAllPatternsOccur) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 6, k = 1 + rng() % 6;
    const Vector x_star = oracle::random_vector(n, rng, -0.5, 0.5);
    const Network net = oracle::all_patterns_relu_net(n, k, 2, x_star, rng);
    Box dom{Vector(n, -1.0), Vector(n, 1.0)};
    BabOptions opts;
    opts.max_boxes = 200;
    const LipschitzCertificate c = bab_lipschitz(net, dom, opts);
    EXPECT_NEAR(c.upper, oracle::max_pattern_norm(net), 1e-9);
    EXPECT_GE(c.upper, c.lower - 1e-12);
    EXPECT_EQ(c.method, CertificateMethod::BranchAndBound);
  }
}

TEST(Bab, SoundOnDeeperNets) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 5; ++t) {
    const std::size_t hidden[] = {6, 5};
    const Network net = make_dense_relu(3, hidden, 2, rng);
    Box dom{Vector(3, -1.0), Vector(3, 1.0)};
    BabOptions opts;
    opts.max_boxes = 500;
    const LipschitzCertificate c = bab_lipschitz(net, dom, opts);
    EXPECT_GE(c.upper, empirical_lipschitz_lower(net, dom, 2000, t) - 1e-12);
    EXPECT_GE(c.upper, c.lower - 1e-12);
  }
}

TEST(Bab, LinearNetIsExactImmediately) {
  Network net;
  net.layers.push_back({LayerKind::LinearFree, Matrix{{3, 4}}, Vector{1}});
  const LipschitzCertificate c = bab_lipschitz(net, Box{{-1, -1}, {1, 1}});
  EXPECT_NEAR(c.upper, 5.0, 1e-12);
  EXPECT_TRUE(c.tight);
  EXPECT_EQ(c.boxes, 1u);
}

TEST(Bab, TinyBudgetStaysSound) {
  std::mt19937_64 rng(7);
  const std::size_t hidden[] = {20, 20};
  const Network net = make_dense_relu(4, hidden, 2, rng);
  Box dom{Vector(4, -1.0), Vector(4, 1.0)};
  BabOptions opts;
  opts.max_boxes = 3;
  const LipschitzCertificate c = bab_lipschitz(net, dom, opts);
  EXPECT_FALSE(c.tight);
  EXPECT_LE(c.boxes, 3u);
  EXPECT_GE(c.upper, empirical_lipschitz_lower(net, dom, 2000, 1));
}

TEST(Bab, RejectsUnsupportedNets) {
  std::mt19937_64 rng(8);
  const std::size_t hidden[] = {4};
  Box dom{Vector(2, -1.0), Vector(2, 1.0)};
  EXPECT_THROW(bab_lipschitz(make_lcnn(2, hidden, 1, rng), dom), ValidationError);
  EXPECT_THROW(bab_lipschitz(make_dense_relu(3, hidden, 1, rng), dom), ValidationError);
  BabOptions opts;
  opts.enumerate_max_unstable = 30;
  EXPECT_THROW(bab_lipschitz(make_dense_relu(2, hidden, 1, rng), dom, opts), ValidationError);
}

TEST(CertifyLcnn, UsesFinalLayerWhenProjected) {
  std::mt19937_64 rng(9);
  const std::size_t hidden[] = {8, 8};
  const Network net = make_lcnn(3, hidden, 2, rng);
  Box dom{Vector(3, -1.0), Vector(3, 1.0)};
  const LipschitzCertificate c = certify_lcnn(net, dom, 500, 1);
  EXPECT_EQ(c.method, CertificateMethod::FinalLayer);
  EXPECT_NEAR(c.upper, oracle::sigma_max(net.layers.back().weight), 1e-6);
  EXPECT_LE(c.lower, c.upper + 1e-12);
  Network loose = net;
  loose.layers[0].weight *= 2.0;
  EXPECT_EQ(certify_lcnn(loose, dom, 100, 1).method, CertificateMethod::SpectralProduct);
}
