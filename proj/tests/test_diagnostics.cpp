#include "spring/diagnostics.hpp"
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

TEST(GradMap, UnregularizedIsGradient) {
  const auto p = LeastSquaresProblem::random(4, 3, 2, 31);
  CounterRng r(1, Stream::test);
  const Iterate z{rvec(r, 3), rvec(r, 2)};
  const Vec xn = rvec(r, 3);
  for (double g : {0.1, 1.0, 7.0}) {
    const auto G = generalized_gradient_map(p, z, xn, g, 2 * g);
    EXPECT_LT((G.g_x - full_grad_x(p, z.x, z.y)).norm(), 1e-10);
    EXPECT_LT((G.g_y - full_grad_y(p, xn, z.y)).norm(), 1e-10);
  }
}

TEST(GradMap, ZeroAtFixedPoint) {
  const auto p = LeastSquaresProblem::separable(Vec::Ones(2), Vec::Ones(1), 3, 2);
  const Iterate z{Vec::Ones(2), Vec::Ones(1)};
  EXPECT_EQ(generalized_gradient_map(p, z, z.x, 0.5, 0.5).norm_sq, 0.0);
}

TEST(GradMap, BoxConstrainedScalar) {
  // F = 0.5 (x - 3)^2 + 0.5 (y + 1)^2 with x, y >= 0; at (1, 0) and gamma = 1:
  // g_x = (1 - max(0, 1 + 2)) = -2, g_y = (0 - max(0, 0 - 1)) = 0.
  const auto base = LeastSquaresProblem::separable(Vec::Constant(1, 3.0), Vec::Constant(1, -1.0), 1, 3);
  FunctionProblem p;
  p.value = [&](Index i, const Vec& x, const Vec& y) { return base.component_value(i, x, y); };
  p.grad_x = [&](Index i, const Vec& x, const Vec& y) { return base.component_grad_x(i, x, y); };
  p.grad_y = [&](Index i, const Vec& x, const Vec& y) { return base.component_grad_y(i, x, y); };
  p.prox_x_fn = p.prox_y_fn = [](double, const Vec& v) { return Vec(v.cwiseMax(0.0)); };
  const auto G = generalized_gradient_map(p, Iterate{Vec::Ones(1), Vec::Zero(1)}, Vec::Ones(1), 1.0, 1.0);
  EXPECT_NEAR(G.g_x[0], -2.0, 1e-12);
  EXPECT_NEAR(G.g_y[0], 0.0, 1e-12);
  EXPECT_NEAR(G.norm_sq, 4.0, 1e-12);
}

TEST(GradMap, EpsCritical) {
  GradMapEval e;
  e.norm_sq = 0.0;
  EXPECT_TRUE(is_eps_critical(e, 0.0));
  e.norm_sq = 4.0;
  EXPECT_TRUE(is_eps_critical(e, 2.0));
  e.norm_sq = 4.0000001;
  EXPECT_FALSE(is_eps_critical(e, 2.0));
}

TEST(Lyapunov, Formula) {
  const auto p = LeastSquaresProblem::random(3, 2, 2, 32);
  const Iterate z{Vec::Ones(2), Vec::Zero(2)};
  EstimatorConstants c{1.0, 0.0, 0.0, 1.0};
  const double phi = objective(p, z);
  EXPECT_DOUBLE_EQ(lyapunov_psi(p, z, z, 0.0, c), phi);
  Iterate prev = z;
  prev.x[0] += std::sqrt(std::sqrt(2.0));  // ||dz||^2 = sqrt(2)
  EXPECT_NEAR(lyapunov_psi(p, z, prev, 2.0 * std::sqrt(2.0), c), phi + 2.0, 1e-12);
}

TEST(Lyapunov, SagaEpochAverageMostlyDecreasing) {
  // Psi averaged per epoch after the warm-start epoch, SPRING-SAGA with
  // theoretical steps on a least-squares toy, 20 seeds.
  const auto p = LeastSquaresProblem::random(8, 4, 3, 33, 3, SimpleReg{SimpleReg::Kind::l1, 0.05}, {});
  const double L = std::max(p.exact_lipschitz_x(), p.exact_lipschitz_y());
  const double M = p.max_component_lipschitz();
  int good = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SolverConfig cfg;
    cfg.algorithm = Algorithm::spring_saga;
    cfg.batch_size = 4;
    cfg.epochs = 50;
    cfg.seed = seed;
    cfg.warm_start = true;
    cfg.step_policy = StepPolicy::theoretical;
    cfg.lipschitz_L = L;
    cfg.lipschitz_M = M;
    cfg.record_trace = false;
    const auto c = estimator_constants(EstimatorKind::saga, 8, 4, 1.0, L, M);
    const std::size_t per_epoch = cfg.steps_per_epoch(8);
    std::vector<double> avg(cfg.epochs, 0.0);
    CounterRng r(seed, Stream::test);
    const Iterate z0{rvec(r, 4), rvec(r, 3)};
    // Replay the SAGA tables alongside the solver to evaluate the variance term.
    StochasticEstimator shadow(EstimatorKind::saga, 8, 4, 1.0, seed);
    shadow.saga() = SagaState::at(p, z0);
    run(p, cfg, z0, [&](const StepInfo& s) {
      std::size_t dummy = 0;
      const bool warm = s.k <= per_epoch;
      shadow.set_plain_sgd(warm);
      spring_step(p, s.before, shadow, s.gamma_x, s.gamma_y, dummy);
      const double ups = probe_upsilon_saga(p, shadow.saga(), s.after, 4).upsilon;
      avg[(s.k - 1) / per_epoch] += lyapunov_psi(p, s.after, s.before, ups, c) / double(per_epoch);
    });
    bool monotone = true;
    for (std::size_t e = 2; e < avg.size(); ++e) monotone = monotone && avg[e] <= avg[e - 1] * (1 + 1e-12);
    good += monotone;
  }
  EXPECT_GE(good, 18);
}

TEST(FdCheck, LinearQuadraticConstant) {
  FunctionProblem lin;
  lin.n = 2;
  lin.m1 = lin.m2 = 2;
  lin.value = [](Index i, const Vec& x, const Vec& y) { return (1.0 + double(i)) * x.sum() - 2.0 * y.sum(); };
  lin.grad_x = [](Index i, const Vec&, const Vec&) { return Vec::Constant(2, 1.0 + double(i)); };
  lin.grad_y = [](Index, const Vec&, const Vec&) { return Vec::Constant(2, -2.0); };
  EXPECT_LE(fd_gradient_check(lin, Iterate{Vec::Ones(2), Vec::Zero(2)}), 1e-10);

  FunctionProblem cst = lin;
  cst.value = [](Index, const Vec&, const Vec&) { return 3.0; };
  cst.grad_x = cst.grad_y = [](Index, const Vec&, const Vec&) { return Vec::Zero(2); };
  EXPECT_EQ(fd_gradient_check(cst, Iterate{Vec::Ones(2), Vec::Zero(2)}), 0.0);

  const auto quad = LeastSquaresProblem::random(5, 3, 3, 34);
  CounterRng r(2, Stream::test);
  EXPECT_LE(fd_gradient_check(quad, Iterate{rvec(r, 3), rvec(r, 3)}), 1e-5);
}

TEST(FdCheck, DetectsWrongGradient) {
  FunctionProblem p;
  p.value = [](Index, const Vec& x, const Vec&) { return x[0] * x[0]; };
  p.grad_x = [](Index, const Vec& x, const Vec&) { return Vec::Constant(1, x[0]); };
  p.grad_y = [](Index, const Vec&, const Vec&) { return Vec::Zero(1); };
  EXPECT_GT(fd_gradient_check(p, Iterate{Vec::Ones(1), Vec::Zero(1)}), 0.1);
}

TEST(Combinations, CountAndOrder) {
  std::vector<Batch> all;
  for_each_combination(5, 3, [&](const Batch& b) { all.push_back(b); });
  EXPECT_EQ(all.size(), 10u);
  EXPECT_TRUE(std::is_sorted(all.begin(), all.end()));
  EXPECT_EQ(all.front(), (Batch{0, 1, 2}));
  EXPECT_EQ(all.back(), (Batch{2, 3, 4}));
  EXPECT_THROW(for_each_combination(3, 4, [](const Batch&) {}), std::invalid_argument);
}

TEST(BruteforceProx, Examples) {
  Vec v(3);
  v << -1, 2, 0.5;
  EXPECT_EQ(bruteforce_prox_l0_nonneg(v, 1), Vec((Vec(3) << 0, 2, 0).finished()));
  Vec pos(3);
  pos << 1, 0.2, 3;
  EXPECT_EQ(bruteforce_prox_l0_nonneg(pos, 3), pos);
  EXPECT_EQ(bruteforce_prox_l0_nonneg(-pos, 2), Vec::Zero(3));
  Vec tie(3);
  tie << 1, 1, 0;
  EXPECT_EQ(bruteforce_prox_l0_nonneg(tie, 1), Vec((Vec(3) << 1, 0, 0).finished()));
}

TEST(ExhaustiveMse, TrivialCases) {
  const auto p = LeastSquaresProblem::random(5, 2, 2, 35);
  CounterRng r(3, Stream::test);
  const Iterate z{rvec(r, 2), rvec(r, 2)};
  EXPECT_LT(exhaustive_mse(p, EstimatorKind::sgd, 5, Block::x, z), 1e-28);
  const auto exact = SagaState::at(p, z);
  EXPECT_LT(exhaustive_mse(p, EstimatorKind::saga, 2, Block::y, z, &exact), 1e-28);
  EXPECT_GT(exhaustive_mse(p, EstimatorKind::sgd, 2, Block::x, z), 0.0);
  EXPECT_THROW(exhaustive_mse(p, EstimatorKind::saga, 2, Block::x, z), std::invalid_argument);
  const auto big = LeastSquaresProblem::random(9, 2, 2, 36);
  EXPECT_THROW(exhaustive_mse(big, EstimatorKind::sgd, 2, Block::x, Iterate{Vec::Zero(2), Vec::Zero(2)}),
               std::invalid_argument);
}

TEST(ExhaustiveMse, SgdVarianceFormula) {
  // Sampling without replacement: Var = (n - b) / (b (n - 1)) * (1/n) sum ||g_i - g||^2.
  const auto p = LeastSquaresProblem::random(6, 3, 2, 37);
  CounterRng r(4, Stream::test);
  const Iterate z{rvec(r, 3), rvec(r, 2)};
  const Vec g = full_grad_x(p, z.x, z.y);
  double spread = 0;
  for (Index i = 0; i < 6; ++i) spread += (p.component_grad_x(i, z.x, z.y) - g).squaredNorm();
  spread /= 6;
  for (Index b = 1; b <= 6; ++b) {
    const double expect = double(6 - b) / double(b * 5) * spread;
    EXPECT_NEAR(exhaustive_mse(p, EstimatorKind::sgd, b, Block::x, z), expect, 1e-10 * (1 + spread));
  }
}
