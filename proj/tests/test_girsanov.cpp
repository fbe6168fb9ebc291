#include <gtest/gtest.h>

#include <cmath>

#include "stochsens/girsanov.hpp"
#include "stochsens/models.hpp"
#include "stochsens/oracle.hpp"
#include "stochsens/stats.hpp"

using namespace stochsens;

namespace {

Accumulator girsanov_scores(const ModelSpec& m, std::uint64_t n,
                            std::uint64_t seed, Accumulator* martingale = nullptr) {
  Accumulator acc;
  for (std::uint64_t i = 0; i < n; ++i) {
    RngStream rng(seed, i);
    const GirsanovSample s = run_girsanov_sample(m.network, m.observable, m.horizon, rng);
    acc.add(s.score.value);
    if (martingale) martingale->add(s.score.martingale_terminal);
  }
  return acc;
}

}  // namespace

TEST(Girsanov, PureBirthMeanAndVariance) {
  // X ~ Poisson(0.1); score X (X / theta - T) has mean 1 and variance 14.1.
  const auto pb = models::pure_birth(0.1, 1.0);
  const Accumulator acc = girsanov_scores(pb, 200000, 1);
  EXPECT_LT(std::abs(acc.mean - 1.0), 4 * std::sqrt(acc.variance() / acc.n));
  EXPECT_NEAR(acc.variance(), 14.1, 0.1 * 14.1);
}

TEST(Girsanov, BirthDeathTable1Variance) {
  const auto bd = models::birth_death(0.1, 1.0);
  const Accumulator acc = girsanov_scores(bd, 100000, 2);
  EXPECT_NEAR(acc.variance(), 10.7365, 0.15 * 10.7365);
  const double exact = sensitivity_closed_form(ClosedFormModel::birth_death, 0.1, 1.0);
  EXPECT_LT(std::abs(acc.mean - exact), 4 * std::sqrt(acc.variance() / acc.n));
}

TEST(Girsanov, NoJumpsNoScore) {
  // f(X(T)) = 0 whenever nothing fired, so the score vanishes.
  const auto pb = models::pure_birth(0.1, 1.0);
  Trajectory t;
  t.dim = 1;
  t.jump_times = {0.0};
  t.states = {0};
  t.final_state = {0};
  t.t_end = 1.0;
  const GirsanovScore s = score_girsanov(pb.network, pb.observable, 1.0, t);
  EXPECT_EQ(s.value, 0.0);
  EXPECT_EQ(s.firings, 0u);
  EXPECT_DOUBLE_EQ(s.martingale_terminal, -0.1);  // N - theta T
}

TEST(Girsanov, RefusesThetaZero) {
  const auto bd = models::birth_death(0.0, 5.0);
  RngStream rng(3, 0);
  EXPECT_THROW(run_girsanov_sample(bd.network, bd.observable, 5.0, rng),
               InapplicableError);
}

TEST(Girsanov, RefusesSharedOrUnusedParameter) {
  const ReactionNetwork shared = NetworkBuilder()
                                     .species("S", 0)
                                     .parameter("k", 0.5)
                                     .sensitive("k")
                                     .reaction({}, {{"S", 1}}, "k")
                                     .reaction({{"S", 1}}, {}, "k")
                                     .build();
  EXPECT_THROW(girsanov_reaction(shared), InapplicableError);
  const ReactionNetwork unused = NetworkBuilder()
                                     .species("S", 0)
                                     .parameter("k", 0.5)
                                     .parameter("z", 0.5)
                                     .sensitive("z")
                                     .reaction({}, {{"S", 1}}, "k")
                                     .build();
  EXPECT_THROW(girsanov_reaction(unused), InapplicableError);
  EXPECT_EQ(girsanov_reaction(models::birth_death().network), 1u);
}

TEST(Girsanov, MartingaleHasZeroMean) {
  const auto bd = models::birth_death(0.1, 5.0);
  Accumulator m;
  girsanov_scores(bd, 50000, 4, &m);
  EXPECT_LT(std::abs(m.mean), 4 * std::sqrt(m.variance() / m.n));
}

TEST(Girsanov, VarianceGrowsAsThetaShrinks) {
  const Accumulator big = girsanov_scores(models::birth_death(0.1, 5.0), 50000, 5);
  const Accumulator small = girsanov_scores(models::birth_death(0.01, 5.0), 50000, 6);
  EXPECT_GT(small.variance(), 5.0 * big.variance());
}

TEST(Girsanov, StreamingMatchesRecordedTrajectory) {
  const auto g = models::gene_expression(0.0116, 10.0);
  for (std::uint64_t i = 0; i < 20; ++i) {
    RngStream a(7, i), b(7, i);
    const GirsanovSample streamed = run_girsanov_sample(g.network, g.observable, 10.0, a);
    const Trajectory t = simulate(g.network, g.network.theta(), 10.0, b);
    const GirsanovScore recorded = score_girsanov(g.network, g.observable, 10.0, t);
    EXPECT_NEAR(streamed.score.value, recorded.value,
                1e-9 * (1.0 + std::abs(recorded.value)));
    EXPECT_EQ(streamed.score.firings, recorded.firings);
    EXPECT_EQ(streamed.jumps, t.jump_count);
  }
}
