#include "spring/diagnostics.hpp"
#include "spring/estimators.hpp"
#include "spring/problems/least_squares.hpp"
#include "spring/solver.hpp"

#include <gtest/gtest.h>

using namespace spring;

namespace {

Vec rvec(CounterRng& r, Index m) {
  Vec v(static_cast<Eigen::Index>(m));
  for (auto& e : v) e = r.normal();
  return v;
}

}  // namespace

TEST(Sgd, ExhaustiveMeanIsFullGradient) {
  const auto p = LeastSquaresProblem::random(5, 3, 2, 11);
  CounterRng r(1, Stream::test);
  const Iterate z{rvec(r, 3), rvec(r, 2)};
  Vec acc = Vec::Zero(3);
  int count = 0;
  for_each_combination(5, 2, [&](const Batch& b) {
    acc += sgd_estimate_x(p, b, z);
    ++count;
  });
  EXPECT_EQ(count, 10);
  EXPECT_LT((acc / count - full_grad_x(p, z.x, z.y)).norm(), 1e-12);
}

TEST(Sgd, CountsSfo) {
  const auto p = LeastSquaresProblem::random(5, 3, 2, 11);
  std::size_t sfo = 0;
  sgd_estimate_y(p, Batch{0, 3, 4}, Vec::Zero(3), Vec::Zero(2), &sfo);
  EXPECT_EQ(sfo, 3u);
  EXPECT_THROW(sgd_estimate_x(p, Batch{}, Iterate{Vec::Zero(3), Vec::Zero(2)}), std::invalid_argument);
}

TEST(SagaTable, IncrementalMeanMatchesRecomputed) {
  CounterRng r(2, Stream::test);
  std::vector<Vec> rows;
  for (int i = 0; i < 6; ++i) rows.push_back(rvec(r, 4));
  SagaTable t(rows);
  for (int step = 0; step < 40; ++step) {
    BatchGradients fresh{sample_subset(r, 6, 2), {rvec(r, 4), rvec(r, 4)}};
    t.update(fresh);
    Vec mean = Vec::Zero(4);
    for (Index i = 0; i < 6; ++i) mean += t.row(i);
    EXPECT_LT((t.mean() - mean / 6).norm(), 1e-12);
  }
}

TEST(Saga, EstimateFormula) {
  const auto p = LeastSquaresProblem::random(4, 2, 2, 12);
  CounterRng r(3, Stream::test);
  const Iterate z{rvec(r, 2), rvec(r, 2)};
  std::vector<Vec> gx, gy;
  for (int i = 0; i < 4; ++i) {
    gx.push_back(rvec(r, 2));
    gy.push_back(rvec(r, 2));
  }
  const SagaState st{SagaTable(gx), SagaTable(gy)};
  const Batch b{1, 3};
  Vec expect = 0.5 * (p.component_grad_x(1, z.x, z.y) - gx[1] + p.component_grad_x(3, z.x, z.y) - gx[3]);
  expect += (gx[0] + gx[1] + gx[2] + gx[3]) / 4;
  EXPECT_LT((saga_estimate_x(p, b, z, st) - expect).norm(), 1e-12);
}

TEST(Saga, TablesAtPointCost2n) {
  const auto p = LeastSquaresProblem::random(4, 2, 2, 12);
  std::size_t sfo = 0;
  const auto st = SagaState::at(p, Iterate{Vec::Ones(2), Vec::Ones(2)}, &sfo);
  EXPECT_EQ(sfo, 8u);
  EXPECT_LT((st.x.mean() - full_grad_x(p, Vec::Ones(2), Vec::Ones(2))).norm(), 1e-12);
}

TEST(Sarah, RefreshIsExactAndRecursionCosts4b) {
  const auto p = LeastSquaresProblem::random(6, 3, 2, 13);
  CounterRng r(4, Stream::test);
  const Iterate z0{rvec(r, 3), rvec(r, 2)}, z1{rvec(r, 3), rvec(r, 2)};
  SarahState st(6.0);
  std::size_t sfo = 0;
  const Vec e0 = sarah_estimate_x(p, Batch{0}, z0, st, false, &sfo);  // uninitialized: full gradient
  EXPECT_LT((e0 - full_grad_x(p, z0.x, z0.y)).norm(), 1e-12);
  EXPECT_EQ(sfo, 6u);
  sarah_estimate_y(p, Batch{0}, z0, st, true, &sfo);
  EXPECT_EQ(st.refreshes, 1u);
  EXPECT_TRUE(st.initialized);

  sfo = 0;
  const Batch b{1, 4};
  const Vec e1 = sarah_estimate_x(p, b, z1, st, false, &sfo);
  const Vec expect = e0 + 0.5 * (p.component_grad_x(1, z1.x, z1.y) - p.component_grad_x(1, z0.x, z0.y) +
                                 p.component_grad_x(4, z1.x, z1.y) - p.component_grad_x(4, z0.x, z0.y));
  EXPECT_LT((e1 - expect).norm(), 1e-12);
  sarah_estimate_y(p, b, z1, st, false, &sfo);
  EXPECT_EQ(sfo, 4u * b.size());
}

TEST(Sarah, RejectsPeriodBelowOne) { EXPECT_THROW(SarahState(0.5), std::invalid_argument); }

TEST(Sarah, RefreshFrequencyMatchesPeriod) {
  CounterRng coin(5, Stream::sarah_coin);
  const SarahState st(4.0);
  int hits = 0;
  const int N = 20000;
  for (int i = 0; i < N; ++i) hits += st.draw_refresh(coin);
  const double sd = std::sqrt(N * 0.25 * 0.75);
  EXPECT_NEAR(hits, N * 0.25, 4 * sd);
}

TEST(EstimatorConstants, SagaAndSarahValues) {
  const auto saga = estimator_constants(EstimatorKind::saga, 10, 2, 1.0, 2.0, 3.0);
  EXPECT_DOUBLE_EQ(saga.V1, 6.0 * 9.0 / 2.0);
  EXPECT_DOUBLE_EQ(saga.V2, std::sqrt(6.0) * 3.0 / std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(saga.V_upsilon, 134.0 * 10.0 * 4.0 / 4.0);
  EXPECT_DOUBLE_EQ(saga.rho, 0.1);
  const auto sarah = estimator_constants(EstimatorKind::sarah, 10, 2, 5.0, 2.0, 3.0);
  EXPECT_DOUBLE_EQ(sarah.V1, 8.0);
  EXPECT_DOUBLE_EQ(sarah.V2, 4.0);
  EXPECT_DOUBLE_EQ(sarah.V_upsilon, 8.0);
  EXPECT_DOUBLE_EQ(sarah.rho, 0.2);
  EXPECT_THROW(estimator_constants(EstimatorKind::sgd, 10, 2, 1, 1, 1), std::invalid_argument);
}

TEST(VarianceProbe, SagaZeroAtOwnTables) {
  const auto p = LeastSquaresProblem::random(4, 2, 2, 14);
  const Iterate z{Vec::Ones(2), Vec::Zero(2)};
  const auto probe = probe_upsilon_saga(p, SagaState::at(p, z), z, 2);
  EXPECT_LT(probe.upsilon, 1e-24);
  EXPECT_EQ(probe.s, 8u);
}

TEST(StochasticEstimator, SameSeedSameBatches) {
  const auto p = LeastSquaresProblem::random(8, 3, 2, 15);
  const Iterate z{Vec::Ones(3), Vec::Ones(2)};
  StochasticEstimator a(EstimatorKind::sgd, 8, 3, 1.0, 9), b(EstimatorKind::sgd, 8, 3, 1.0, 9);
  std::size_t s1 = 0, s2 = 0;
  for (int i = 0; i < 5; ++i) EXPECT_EQ(a.estimate_x(p, z, s1), b.estimate_x(p, z, s2));
  EXPECT_EQ(s1, 15u);
}
