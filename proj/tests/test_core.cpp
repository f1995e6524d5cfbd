#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "slds/bench.hpp"
#include "slds/core.hpp"
#include "slds/random.hpp"
#include "slds/simulate.hpp"

using namespace slds;

namespace {

ModelBundle half_spaces(double a0, double a1) {
  MatrixXd L(1, 2);
  L << 1, 0;
  VectorXd C(1);
  C << 0;
  std::vector<Regiond> regions{Regiond::polyhedral(L, C, true),
                               Regiond::polyhedral(-L, -C, true)};
  // {x1 <= 0} first, so x1 = 0 goes to region 0
  std::vector<Dynamics<double>> dyn{{a0 * MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 1)},
                                    {a1 * MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 1)}};
  SldsModeld model(2, 1, regions, dyn);
  Policyd pi{MatrixXd::Zero(1, 2)};
  RewardSpecd spec(MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1), pi);
  auto cl = closed_loop(model, pi);
  return ModelBundle{model, pi, spec, cl, 10.0};
}

}  // namespace

TEST(RegionOf, CaseStudyOutsideBallPicksOuterShell) {
  const auto mb = build_case_study(3, 0.9, 2.0, 10.0);
  VectorXd x(3);
  x << 11, 0, 0;
  EXPECT_EQ(region_of(mb.model, x), 0u);
}

TEST(RegionOf, OriginPicksInnerShell) {
  const auto mb = build_case_study(3, 0.9, 2.0, 10.0);
  EXPECT_EQ(region_of(mb.model, VectorXd::Zero(3)), 1u);
}

TEST(RegionOf, BoundaryGoesToInnerShellByRadius) {
  const auto mb = build_case_study(1, 0.9, 2.0, 10.0);
  VectorXd x(1);
  x << 10.0;  // |x| = rho: (rho, inf] excludes it
  EXPECT_EQ(region_of(mb.model, x), 1u);
}

TEST(RegionOf, HalfSpaces) {
  const auto mb = half_spaces(0.5, 0.5);
  VectorXd x(2);
  x << 1, 0;
  EXPECT_EQ(region_of(mb.model, x), 1u);
  x << 0, 5;  // on the boundary: first declared wins
  EXPECT_EQ(region_of(mb.model, x), 0u);
}

TEST(RegionOf, GapThrowsNoRegion) {
  std::vector<Regiond> regions{Regiond::radial_shell(0.0, 1.0)};
  std::vector<Dynamics<double>> dyn{{MatrixXd::Identity(1, 1), MatrixXd::Zero(1, 1)}};
  SldsModeld model(1, 1, regions, dyn);
  VectorXd x(1);
  x << 2.0;
  EXPECT_THROW(region_of(model, x), NoRegion);
}

TEST(RegionOf, DimensionMismatch) {
  const auto mb = build_case_study(2, 0.9, 2.0, 10.0);
  EXPECT_THROW(region_of(mb.model, VectorXd::Zero(3)), DimensionMismatch);
}

TEST(Region, InvalidShellRejected) {
  EXPECT_THROW(Regiond::radial_shell(2.0, 1.0), InvalidArgument);
  EXPECT_THROW(Regiond::radial_shell(-1.0, 1.0), InvalidArgument);
}

TEST(Model, MismatchedDynamicsRejected) {
  std::vector<Regiond> regions{Regiond::radial_shell(0.0, 1.0), Regiond::radial_shell(1.0, INFINITY)};
  std::vector<Dynamics<double>> dyn{{MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 1)}};
  EXPECT_THROW(SldsModeld(2, 1, regions, dyn), DimensionMismatch);
  dyn.push_back({MatrixXd::Identity(3, 3), MatrixXd::Zero(3, 1)});
  EXPECT_THROW(SldsModeld(2, 1, regions, dyn), DimensionMismatch);
}

TEST(Partition, EveryDrawHasExactlyOneRegion) {
  for (const auto& mb : {build_case_study(3, 0.9, 2.0, 10.0), half_spaces(0.5, 0.7)}) {
    RandomStream rng(7);
    const auto n = mb.model.n();
    for (int k = 0; k < 10'000; ++k) {
      const VectorXd x = 5.0 * mb.rho_ball * rng.normal_vector(n);
      int hits = 0;
      for (const auto& r : mb.model.regions()) hits += r.contains(x) ? 1 : 0;
      ASSERT_EQ(hits, 1);
      EXPECT_NO_THROW(region_of(mb.model, x));
    }
  }
}

TEST(ClosedLoop, AddsFeedback) {
  std::vector<Regiond> regions{Regiond::radial_shell(0.0, INFINITY)};
  std::vector<Dynamics<double>> dyn{{0.5 * MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)}};
  SldsModeld model(2, 2, regions, dyn);
  const auto cl = closed_loop(model, Policyd{0.4 * MatrixXd::Identity(2, 2)});
  EXPECT_TRUE(cl.ahat(0).isApprox(0.9 * MatrixXd::Identity(2, 2), 1e-15));
  EXPECT_NEAR(cl.ahat_norms()[0], 0.9, 1e-15);
}

TEST(ClosedLoop, ZeroInputMatrixKeepsA) {
  const auto mb = build_case_study(4, 0.9, 2.0, 10.0);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(mb.cl.ahat(j), mb.model.dynamics()[j].A);
  EXPECT_DOUBLE_EQ(mb.cl.ahat_norms()[0], 0.9);
  EXPECT_DOUBLE_EQ(mb.cl.ahat_norms()[1], 2.0);
}

TEST(ClosedLoop, PolicyShapeChecked) {
  const auto mb = build_case_study(2, 0.9, 2.0, 10.0);
  EXPECT_THROW(closed_loop(mb.model, Policyd{MatrixXd::Zero(2, 2)}), DimensionMismatch);
}

TEST(SpectralNorm, ScaledIdentity) { EXPECT_NEAR(spectral_norm(2.0 * MatrixXd::Identity(5, 5)), 2.0, 1e-15); }

TEST(SpectralNorm, NilpotentShift) {
  MatrixXd A(2, 2);
  A << 0, 1, 0, 0;
  EXPECT_NEAR(spectral_norm(A), 1.0, 1e-15);
}

TEST(SpectralNorm, MatchesIndependentOracles) {
  RandomStream rng(11);
  for (int k = 0; k < 50; ++k) {
    MatrixXd A(5, 5);
    rng.fill_normal(A);
    const double s = spectral_norm(A);
    // divide-and-conquer SVD and the eigenvalues of A^T A
    Eigen::BDCSVD<MatrixXd> bdc(A);
    EXPECT_NEAR(s, bdc.singularValues()(0), 1e-8 * s);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(A.transpose() * A);
    EXPECT_NEAR(s, std::sqrt(es.eigenvalues().maxCoeff()), 1e-8 * s);
  }
}

TEST(SpectralNorm, NonFiniteRejected) {
  MatrixXd A = MatrixXd::Identity(2, 2);
  A(0, 1) = std::nan("");
  EXPECT_THROW(spectral_norm(A), InvalidArgument);
}

TEST(SpectralNorm, FloatInstantiation) {
  Eigen::MatrixXf A = 3.0f * Eigen::MatrixXf::Identity(3, 3);
  EXPECT_NEAR(spectral_norm(A), 3.0f, 1e-6f);
}

TEST(Reward, Examples) {
  const Policyd pi{MatrixXd::Zero(1, 2)};
  RewardSpecd id(MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1), pi);
  VectorXd x(2);
  x << 3, 4;
  EXPECT_EQ(reward(x, id), 5.0);
  EXPECT_EQ(reward(VectorXd::Zero(2), id), 0.0);
  MatrixXd Q = MatrixXd::Zero(2, 2);
  Q(0, 0) = 4;
  RewardSpecd semi(Q, MatrixXd::Identity(1, 1), pi);
  x << 1, 7;
  EXPECT_EQ(reward(x, semi), 2.0);
}

TEST(Reward, PolicyTermAndNormalisation) {
  const Policyd pi{(MatrixXd(1, 2) << 1, 1).finished()};
  RewardSpecd spec(MatrixXd::Identity(2, 2), 2.0 * MatrixXd::Identity(1, 1), pi);
  MatrixXd expected = MatrixXd::Identity(2, 2) + 2.0 * MatrixXd::Ones(2, 2);
  EXPECT_TRUE(spec.effective().isApprox(expected, 1e-15));
  RewardSpecd norm(MatrixXd::Identity(2, 2), 2.0 * MatrixXd::Identity(1, 1), pi, true);
  EXPECT_NEAR(spectral_norm(norm.effective()), 1.0, 1e-12);
}

TEST(Reward, InvalidMatricesRejected) {
  const Policyd pi{MatrixXd::Zero(1, 2)};
  MatrixXd Q(2, 2);
  Q << 1, 0, 0, -1;
  EXPECT_THROW(RewardSpecd(Q, MatrixXd::Identity(1, 1), pi), InvalidArgument);
  EXPECT_THROW(RewardSpecd(MatrixXd::Identity(2, 2), MatrixXd::Zero(1, 1), pi), InvalidArgument);
  Q << 1, 1, 0, 1;
  EXPECT_THROW(RewardSpecd(Q, MatrixXd::Identity(1, 1), pi), InvalidArgument);
}

TEST(Step, ZeroNoiseContracts) {
  const auto mb = half_spaces(0.9, 0.9);
  RandomStream rng(1);
  VectorXd x(2);
  x << 10, 0;
  SimulationOptions opts;
  opts.zero_noise = true;
  const VectorXd y = step(mb.cl, mb.model, x, rng, opts);
  EXPECT_NEAR(y(0), 9.0, 1e-15);
  EXPECT_EQ(y(1), 0.0);
}

TEST(Step, MomentsMatchAnalyticValues) {
  const auto mb = build_case_study(2, 0.9, 2.0, 10.0);
  for (double r : {3.0, 15.0}) {
    VectorXd x(2);
    x << r, -0.5 * r;
    const std::size_t j = region_of(mb.model, x);
    const VectorXd mean = mb.cl.ahat(j) * x;
    RandomStream rng(99);
    const int m = 100'000;
    VectorXd sum = VectorXd::Zero(2);
    double sq = 0, sq2 = 0;
    for (int k = 0; k < m; ++k) {
      const VectorXd y = step(mb.cl, mb.model, x, rng);
      sum += y;
      sq += y.squaredNorm();
      sq2 += y.squaredNorm() * y.squaredNorm();
    }
    const VectorXd emp = sum / m;
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(emp(i), mean(i), 4.0 / std::sqrt(double(m)));
    const double msq = sq / m;
    const double se = std::sqrt((sq2 / m - msq * msq) / m);
    EXPECT_NEAR(msq, mean.squaredNorm() + 2.0, 4.0 * se);
  }
}

TEST(Simulate, HorizonOneReturnsX0) {
  const auto mb = build_case_study(2, 0.9, 2.0, 10.0);
  RandomStream rng(1);
  VectorXd x0(2);
  x0 << 1, 2;
  const auto t = simulate(mb.cl, mb.model, mb.spec, x0, 1, rng);
  ASSERT_EQ(t.size(), 1);
  EXPECT_EQ(t.states.col(0), x0);
  EXPECT_EQ(t.rewards(0), reward(x0, mb.spec));
}

TEST(Simulate, SeedDeterminismAndExactRewards) {
  const auto mb = build_case_study(3, 0.9, 2.0, 10.0);
  RandomStream a(42), b(42);
  const auto ta = simulate(mb.cl, mb.model, mb.spec, VectorXd::Zero(3), 500, a);
  const auto tb = simulate(mb.cl, mb.model, mb.spec, VectorXd::Zero(3), 500, b);
  EXPECT_TRUE((ta.states.array() == tb.states.array()).all());
  for (Eigen::Index i = 0; i < ta.size(); ++i) {
    EXPECT_EQ(ta.rewards(i), reward(ta.states.col(i), mb.spec));
    EXPECT_GE(ta.rewards(i), 0.0);
  }
}

TEST(Simulate, TimeAverageSecondMomentBelowStationaryBound) {
  const Eigen::Index n = 2;
  const auto mb = build_case_study(n, 0.9, 2.0, 10.0);
  RandomStream rng(5);
  const auto t = simulate(mb.cl, mb.model, mb.spec, VectorXd::Zero(n), 200'000, rng);
  const double avg = t.states.colwise().squaredNorm().mean();
  const double bound = (n + 4.0 * 100.0) / (1.0 - 0.81);
  EXPECT_LE(avg, bound * 1.05);
}

TEST(Simulate, DivergenceReported) {
  std::vector<Regiond> regions{Regiond::radial_shell(0.0, INFINITY)};
  std::vector<Dynamics<double>> dyn{{1.5 * MatrixXd::Identity(1, 1), MatrixXd::Zero(1, 1)}};
  SldsModeld model(1, 1, regions, dyn);
  Policyd pi{MatrixXd::Zero(1, 1)};
  RewardSpecd spec(MatrixXd::Identity(1, 1), MatrixXd::Identity(1, 1), pi);
  const auto cl = closed_loop(model, pi);
  RandomStream rng(1);
  VectorXd x0(1);
  x0 << 1.0;
  try {
    simulate(cl, model, spec, x0, 10'000, rng);
    FAIL() << "expected Divergence";
  } catch (const Divergence& e) {
    EXPECT_GT(e.step(), 100u);
    EXPECT_LT(e.step(), 10'000u);
  }
}

TEST(Simulate, TrajectoryCsvHeader) {
  const auto mb = build_case_study(2, 0.9, 2.0, 10.0);
  RandomStream rng(1);
  const auto t = simulate(mb.cl, mb.model, mb.spec, VectorXd::Zero(2), 3, rng);
  std::ostringstream os;
  write_trajectory_csv(os, t);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "step,x_0,x_1,reward");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}

TEST(Random, DeriveSeedIsDeterministicAndSpreads) {
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(2, {2, 3}));
  EXPECT_NE(seed_bits(0.5), seed_bits(0.55));
}
