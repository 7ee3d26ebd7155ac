#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace declqr;
using declqr::testing::three_node_graph;
using declqr::testing::unit_partition;

namespace {

// Positive root of b^2 P^2 + (r (1 - a^2) - q b^2) P - r q = 0.
double scalar_dare(double a, double b, double q, double r) {
  if (b == 0.0) return q / (1.0 - a * a);
  const double c1 = r * (1.0 - a * a) - q * b * b;
  return (-c1 + std::sqrt(c1 * c1 + 4.0 * b * b * r * q)) / (2.0 * b * b);
}

double scalar_gain(double a, double b, double r, double p) { return -a * b * p / (r + b * b * p); }

Matrix mat1(double v) { return Matrix::Constant(1, 1, v); }

SystemModel scalar_model(double a, double b, double q, double r, double sigma_w) {
  SystemModel m;
  m.partition = unit_partition(1);
  m.A = mat1(a);
  m.B = mat1(b);
  m.Q = mat1(q);
  m.R = mat1(r);
  m.sigma_w = sigma_w;
  return m;
}

Matrix dare_residual(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r, const Matrix& p) {
  const Matrix g = r + b.transpose() * p * b;
  return q + a.transpose() * p * a - a.transpose() * p * b * g.ldlt().solve(b.transpose() * p * a) - p;
}

}  // namespace

TEST(Dare, ScalarClosedForm) {
  const auto sol = solve_root_dare(mat1(0.5), mat1(1), mat1(1), mat1(1));
  const double p = (0.25 + std::sqrt(0.0625 + 4.0)) / 2.0;
  EXPECT_NEAR(sol.P(0, 0), p, 1e-8);
  EXPECT_NEAR(sol.K(0, 0), -0.5 * p / (1 + p), 1e-8);
  EXPECT_NEAR(sol.P(0, 0), 1.1327822, 1e-7);
  // -0.5 P / (1 + P) = -0.2655644...; a quoted -0.2655602 does not satisfy it.
  EXPECT_NEAR(sol.K(0, 0), -0.2655644, 1e-7);
}

TEST(Dare, ScalarSweep) {
  for (double a : {-1.5, -0.3, 0.0, 0.8, 1.0, 2.0}) {
    for (double b : {0.5, 1.0, -2.0}) {
      for (double q : {1.0, 3.0}) {
        for (double r : {1.0, 10.0}) {
          const auto sol = solve_root_dare(mat1(a), mat1(b), mat1(q), mat1(r));
          const double p = scalar_dare(a, b, q, r);
          EXPECT_NEAR(sol.P(0, 0), p, 1e-8 * std::max(1.0, p)) << a << " " << b << " " << q << " " << r;
          EXPECT_NEAR(sol.K(0, 0), scalar_gain(a, b, r, p), 1e-8);
          EXPECT_LT(std::abs(a + b * sol.K(0, 0)), 1.0);
        }
      }
    }
  }
}

TEST(Dare, DecoupledTwoByTwo) {
  const Matrix a = 0.9 * Matrix::Identity(2, 2);
  const auto sol = solve_root_dare(a, Matrix::Identity(2, 2), 2 * Matrix::Identity(2, 2), 5 * Matrix::Identity(2, 2));
  const double p = scalar_dare(0.9, 1, 2, 5);
  const double k = scalar_gain(0.9, 1, 5, p);
  EXPECT_LE((sol.P - p * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((sol.K - k * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-8);

  Matrix ad(2, 2), bd(2, 2);
  ad << 1.1, 0, 0, 0.4;
  bd << 0.7, 0, 0, 2.0;
  const auto sd = solve_root_dare(ad, bd, Matrix::Identity(2, 2), 3 * Matrix::Identity(2, 2));
  EXPECT_NEAR(sd.P(0, 0), scalar_dare(1.1, 0.7, 1, 3), 1e-8);
  EXPECT_NEAR(sd.P(1, 1), scalar_dare(0.4, 2.0, 1, 3), 1e-8);
  EXPECT_NEAR(sd.P(0, 1), 0.0, 1e-10);
}

TEST(Dare, ZeroInputMatrix) {
  Matrix q0(2, 2);
  q0 << 2, 0.5, 0.5, 1;
  const auto sol = solve_root_dare(Matrix::Zero(2, 2), Matrix::Zero(2, 1), q0, mat1(1));
  EXPECT_LE((sol.P - q0).norm(), 1e-12);
  EXPECT_EQ(sol.K.rows(), 1);
  EXPECT_EQ(sol.K.norm(), 0.0);
}

TEST(Dare, RandomResidualAndSymmetry) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 4, m = 1 + trial % 2;
    Matrix a(n, n), b(n, m);
    for (int i = 0; i < a.size(); ++i) a.data()[i] = nd(rng);
    for (int i = 0; i < b.size(); ++i) b.data()[i] = nd(rng);
    const Matrix q = 2 * Matrix::Identity(n, n), r = Matrix::Identity(m, m);
    if (!is_stabilizable(a, b)) continue;
    const auto sol = solve_root_dare(a, b, q, r);
    EXPECT_LE((sol.P - sol.P.transpose()).norm(), 1e-10);
    EXPECT_LE(dare_residual(a, b, q, r, sol.P).norm(), 1e-8 * (1 + sol.P.norm()));
    EXPECT_LT(spectral_radius(a + b * sol.K), 1.0);
  }
}

TEST(Dare, UnstabilizableDoesNotConverge) {
  RiccatiOptions opts;
  opts.max_iter = 2000;
  EXPECT_THROW(solve_root_dare(mat1(2.0), mat1(0.0), mat1(1), mat1(1), opts), NoConvergence);
}

TEST(Synthesis, SingleNodeIsCentralLqr) {
  const auto m = scalar_model(0.5, 1, 1, 1, 1);
  const Network net(DirectedDelayGraph(1, {}));
  const auto gains = synthesize_gains(m, net.info);
  ASSERT_EQ(gains.nodes.size(), 1u);
  EXPECT_NEAR(gains.nodes[0].P(0, 0), 1.1327822, 1e-7);
  EXPECT_NEAR(optimal_cost(gains, net.info, m.partition, 1.0), 1.1327822, 1e-7);
  EXPECT_EQ(optimal_cost(gains, net.info, m.partition, 0.0), 0.0);
}

// Oracle: the recursion run by hand on the three-node example with scalar subsystems.
TEST(Synthesis, ThreeNodeHandRecursion) {
  const auto plant = declqr::testing::random_plant(three_node_graph(), unit_partition(3), 31);
  const auto& m = plant.model;
  const auto& ig = plant.net.info;
  const auto& gains = plant.gains;
  ASSERT_EQ(gains.nodes.size(), 4u);

  const NodeSet all{0, 1, 2};
  const int root = *ig.find(all);
  const auto dare = solve_root_dare(m.A, m.B, m.Q, m.R);
  EXPECT_LE((gains.nodes[root].P - dare.P).norm(), 1e-8);
  EXPECT_LE((gains.nodes[root].K - dare.K).norm(), 1e-8);

  for (const NodeSet& leaf : {NodeSet{0, 1}, NodeSet{2}}) {
    const int r = *ig.find(leaf);
    const Matrix a_sr = m.A(Eigen::all, leaf);
    const Matrix b_sr = m.B(Eigen::all, leaf);
    const Matrix q_rr = m.Q(leaf, leaf), r_rr = m.R(leaf, leaf);
    const Matrix& ps = dare.P;
    const Matrix k = -(r_rr + b_sr.transpose() * ps * b_sr).ldlt().solve(b_sr.transpose() * ps * a_sr);
    const Matrix cl = a_sr + b_sr * k;
    const Matrix p = q_rr + k.transpose() * r_rr * k + cl.transpose() * ps * cl;
    EXPECT_LE((gains.nodes[r].K - k).norm(), 1e-8);
    EXPECT_LE((gains.nodes[r].P - p).norm(), 1e-8);
  }

  const int n1 = *ig.find({0});
  const auto iso = solve_root_dare(m.A.topLeftCorner(1, 1), m.B.topLeftCorner(1, 1), m.Q.topLeftCorner(1, 1),
                                   m.R.topLeftCorner(1, 1));
  EXPECT_NEAR(gains.nodes[n1].P(0, 0), iso.P(0, 0), 1e-8);

  // J* = Tr blk1 P_{1} + Tr blk2 P_{1,2} + Tr blk3 P_{3}.
  const double expect = gains.nodes[n1].P(0, 0) + gains.nodes[*ig.find({0, 1})].P(1, 1) +
                        gains.nodes[*ig.find({2})].P(0, 0);
  EXPECT_NEAR(plant.j_star, expect, 1e-10);
}

TEST(Synthesis, EstimateEqualToTruthGivesSameGains) {
  const auto plant = declqr::testing::random_plant(three_node_graph(), Partition({2, 1, 1}, {1, 1, 1}), 2);
  const auto est = synthesize_gains(plant.model.A, plant.model.B, plant.model, plant.net.info, GainKind::kEstimate);
  for (std::size_t r = 0; r < est.nodes.size(); ++r) {
    EXPECT_EQ(est.nodes[r].K, plant.gains.nodes[r].K);
    EXPECT_EQ(est.nodes[r].P, plant.gains.nodes[r].P);
  }
}

TEST(Synthesis, DelaysCostMoreThanCentralized) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const int p = 2 + trial % 3;
    const auto g = declqr::testing::random_graph(p, rng, 0.6);
    const auto plant = declqr::testing::random_plant(g, unit_partition(p), 100 + trial);
    const auto central = solve_root_dare(plant.model.A, plant.model.B, plant.model.Q, plant.model.R);
    EXPECT_GE(plant.j_star, central.P.trace() - 1e-9);
  }
}

TEST(Tilde, TrueGainsReproduceOptimum) {
  const auto plant = declqr::testing::random_plant(three_node_graph(), unit_partition(3), 5);
  const auto tc = tilde_P_and_cost(plant.gains, plant.model, plant.net.info);
  EXPECT_NEAR(tc.cost, plant.j_star, 1e-8 * plant.j_star);
  for (std::size_t r = 0; r < tc.P.size(); ++r) EXPECT_LE((tc.P[r] - plant.gains.nodes[r].P).norm(), 1e-8);
}

TEST(Tilde, ScalarFixedPoint) {
  const auto m = scalar_model(0.5, 1, 1, 1, 1);
  const Network net(DirectedDelayGraph(1, {}));
  auto gains = synthesize_gains(m, net.info);
  const double k = gains.nodes[0].K(0, 0) + 0.01;
  gains.nodes[0].K(0, 0) = k;
  gains.kind = GainKind::kMixedTilde;
  const auto tc = tilde_P_and_cost(gains, m, net.info);
  const double cl = 0.5 + k;
  const double p = (1 + k * k) / (1 - cl * cl);
  EXPECT_NEAR(tc.cost, p, 1e-9);
  EXPECT_GE(tc.cost, 1.1327822);

  auto quiet = m;
  quiet.sigma_w = 0;
  EXPECT_EQ(tilde_P_and_cost(gains, quiet, net.info).cost, 0.0);

  gains.nodes[0].K(0, 0) = 1.0;  // a + b k = 1.5
  EXPECT_THROW(tilde_P_and_cost(gains, m, net.info), UnstableMixedLoop);
}

TEST(Tilde, PerturbedGainsNeverBeatOptimum) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  const auto plant = declqr::testing::random_plant(three_node_graph(), unit_partition(3), 6);
  for (int trial = 0; trial < 20; ++trial) {
    GainSet g = plant.gains;
    for (auto& node : g.nodes)
      for (int i = 0; i < node.K.size(); ++i) node.K.data()[i] += 0.05 * nd(rng);
    const auto tc = tilde_P_and_cost(g, plant.model, plant.net.info);
    EXPECT_GE(tc.cost, plant.j_star - 1e-9);
  }
}
