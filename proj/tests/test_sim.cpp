#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <set>
#include <sstream>

#include "stochsens/coupling.hpp"
#include "stochsens/models.hpp"
#include "stochsens/sim.hpp"
#include "stochsens/stats.hpp"

using namespace stochsens;

TEST(Rng, SameAddressSameSequence) {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(Rng, DistinctStreamsDiffer) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t id = 0; id < 1000; ++id) firsts.insert(RngStream(1, id)());
  EXPECT_EQ(firsts.size(), 1000u);
  RngStream a(1, 0), b(2, 0);
  EXPECT_NE(a(), b());
}

TEST(Rng, ChildIsAddressBasedSplitAdvances) {
  RngStream a(3, 5);
  const RngStream c1 = a.child(9);
  a();
  EXPECT_TRUE(c1 == a.child(9));
  RngStream b(3, 5);
  const RngStream s1 = b.split();
  const RngStream s2 = b.split();
  EXPECT_FALSE(s1 == s2);
}

TEST(Rng, UniformMomentsAndRange) {
  RngStream r(11, 0);
  Accumulator acc;
  for (int i = 0; i < 200000; ++i) {
    const double u = r.uniform_pos();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    acc.add(u);
  }
  EXPECT_NEAR(acc.mean, 0.5, 0.005);
  EXPECT_NEAR(acc.variance(), 1.0 / 12, 0.002);
  Accumulator e;
  for (int i = 0; i < 200000; ++i) e.add(r.exponential(2.0));
  EXPECT_NEAR(e.mean, 0.5, 0.005);
}

TEST(Simulate, PureBirthMean) {
  const auto pb = models::pure_birth(1.0);
  Accumulator acc;
  for (std::uint64_t i = 0; i < 100000; ++i) {
    RngStream rng(5, i);
    acc.add(static_cast<double>(
        simulate(pb.network, 1.0, 10.0, rng, Recording::endpoint()).final_state[0]));
  }
  EXPECT_NEAR(acc.mean, 10.0, 0.1);
}

TEST(Simulate, PureBirthChiSquareAgainstPoisson) {
  const double lambda = 10.0;
  const auto pb = models::pure_birth(1.0);
  const int n = 100000;
  std::vector<int> counts(200, 0);
  for (int i = 0; i < n; ++i) {
    RngStream rng(6, static_cast<std::uint64_t>(i));
    const Count x = simulate(pb.network, 1.0, 10.0, rng, Recording::endpoint()).final_state[0];
    ++counts[std::min<Count>(x, 199)];
  }
  // Bins with expected count >= 5; tails merged into the end bins.
  std::vector<double> pmf(200);
  for (int k = 0; k < 200; ++k)
    pmf[k] = std::exp(-lambda + k * std::log(lambda) - std::lgamma(k + 1.0));
  int lo = 0, hi = 199;
  while (pmf[lo] * n < 5) ++lo;
  while (pmf[hi] * n < 5) --hi;
  double chi2 = 0.0;
  int bins = 0;
  double obs_tail = 0, exp_tail = 0;
  for (int k = 0; k <= lo; ++k) obs_tail += counts[k], exp_tail += pmf[k] * n;
  chi2 += (obs_tail - exp_tail) * (obs_tail - exp_tail) / exp_tail;
  ++bins;
  for (int k = lo + 1; k < hi; ++k) {
    const double e = pmf[k] * n;
    chi2 += (counts[k] - e) * (counts[k] - e) / e;
    ++bins;
  }
  obs_tail = 0, exp_tail = 0;
  for (int k = hi; k < 200; ++k) obs_tail += counts[k], exp_tail += pmf[k] * n;
  chi2 += (obs_tail - exp_tail) * (obs_tail - exp_tail) / exp_tail;
  ++bins;
  const boost::math::chi_squared dist(bins - 1);
  const double critical = boost::math::quantile(boost::math::complement(dist, 0.001));
  EXPECT_LT(chi2, critical) << "bins=" << bins;
}

TEST(Simulate, ThetaZeroPureBirthIsAbsorbed) {
  const auto pb = models::pure_birth(0.0);
  RngStream rng(1, 1);
  const Trajectory t = simulate(pb.network, 0.0, 10.0, rng);
  EXPECT_EQ(t.jump_count, 0u);
  EXPECT_TRUE(t.absorbed);
}

TEST(Simulate, BirthDeathMean) {
  const auto bd = models::birth_death(0.1);
  Accumulator acc;
  for (std::uint64_t i = 0; i < 20000; ++i) {
    RngStream rng(8, i);
    acc.add(static_cast<double>(
        simulate(bd.network, 0.1, 5.0, rng, Recording::endpoint()).final_state[0]));
  }
  const double exact = (1 - std::exp(-0.5)) / 0.1;
  EXPECT_NEAR(acc.mean, exact, 0.02 * exact);
}

TEST(Simulate, DeterministicReplay) {
  const auto g = models::gene_expression(0.0116);
  RngStream a(77, 3), b(77, 3);
  const Trajectory ta = simulate(g.network, 0.0116, 10.0, a);
  const Trajectory tb = simulate(g.network, 0.0116, 10.0, b);
  EXPECT_EQ(ta.jump_times, tb.jump_times);
  EXPECT_EQ(ta.states, tb.states);
  EXPECT_EQ(ta.reaction_ids, tb.reaction_ids);
}

TEST(Simulate, TrajectoryInvariants) {
  const auto g = models::gene_expression(0.0693);
  const Kinetics kin(g.network);
  for (std::uint64_t i = 0; i < 200; ++i) {
    RngStream rng(9, i);
    const Trajectory t = simulate(g.network, 0.0693, 10.0, rng);
    ASSERT_EQ(t.jump_times.front(), 0.0);
    for (std::size_t j = 0; j + 1 < t.num_states(); ++j) {
      ASSERT_LT(t.jump_times[j], t.jump_times[j + 1]);
      ASSERT_LE(t.jump_times[j + 1], 10.0);
      const auto zeta = kin.stoich(t.reaction_ids[j]);
      for (std::size_t s = 0; s < 3; ++s) {
        ASSERT_EQ(t.state(j + 1)[s], t.state(j)[s] + zeta[s]);
        ASSERT_GE(t.state(j + 1)[s], 0);
      }
    }
    ASSERT_EQ(t.jump_count, t.num_jumps());
  }
}

TEST(Simulate, JumpCapGuard) {
  const auto pb = models::pure_birth(100.0);
  RngStream rng(1, 0);
  SimOptions opt;
  opt.jump_cap = 50;
  EXPECT_THROW(simulate(pb.network, 100.0, 10.0, rng, Recording::all(), opt),
               SimulationError);
}

TEST(Simulate, ThinnedRecordingMatchesFull) {
  const auto g = models::gene_expression(0.0116);
  const std::vector<double> times{0.0, 0.5, 2.0, 3.3, 7.25, 10.0};
  for (std::uint64_t i = 0; i < 50; ++i) {
    RngStream a(10, i), b(10, i);
    const Trajectory full = simulate(g.network, 0.0116, 10.0, a);
    const Trajectory thin = simulate(g.network, 0.0116, 10.0, b, Recording::at(times));
    ASSERT_EQ(thin.sample_times, times);
    for (std::size_t j = 0; j < times.size(); ++j) {
      const auto s = full.state_at(times[j]);
      for (std::size_t c = 0; c < 3; ++c) ASSERT_EQ(thin.sample(j)[c], s[c]);
    }
    EXPECT_EQ(thin.final_state, full.final_state);
  }
}

TEST(Simulate, IntegrateIsExactPiecewiseSum) {
  const auto bd = models::birth_death(0.1);
  RngStream rng(12, 0);
  const Trajectory t = simulate(bd.network, 0.1, 5.0, rng);
  double manual = 0.0;
  for (std::size_t i = 0; i < t.num_states(); ++i) {
    const double end = i + 1 < t.num_states() ? t.jump_times[i + 1] : 5.0;
    manual += static_cast<double>(t.state(i)[0]) * (end - t.jump_times[i]);
  }
  EXPECT_NEAR(t.integrate(bd.observable, 0.0, 5.0), manual, 1e-12);
  EXPECT_EQ(t.integrate(bd.observable, 1.0, 1.0), 0.0);
}

TEST(TrajectoryCsv, HorizonZeroGivesInitialRowOnly) {
  const auto bd = models::birth_death(0.1);
  RngStream rng(1, 0);
  const Trajectory t = simulate(bd.network, 0.1, 0.0, rng);
  std::ostringstream out;
  write_trajectory_csv(t, out);
  EXPECT_EQ(out.str(), "t,reaction,s_0\n0,-1,0\n");
}

TEST(TrajectoryCsv, RowPerJumpPlusFinalRow) {
  const auto g = models::gene_expression(0.0116);
  RngStream rng(2, 0);
  const Trajectory t = simulate(g.network, 0.0116, 5.0, rng);
  std::ostringstream out;
  write_trajectory_csv(t, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,reaction,s_0,s_1,s_2");
  std::size_t rows = 0;
  std::string last;
  while (std::getline(in, line)) ++rows, last = line;
  EXPECT_EQ(rows, t.num_jumps() + 2);
  EXPECT_EQ(last.substr(0, 2), "5,");
}

// ---------------------------------------------------------------------------
// Coupled pairs

namespace {

const Coupling kCouplings[] = {Coupling::cfd, Coupling::crp, Coupling::crn};

}  // namespace

TEST(Coupling, ZeroStepRejected) {
  const auto bd = models::birth_death(0.1);
  RngStream rng(1, 0);
  for (Coupling c : kCouplings)
    EXPECT_THROW(simulate_pair(c, bd.network, 0.1, 0.0, 5.0, rng), Error);
  EXPECT_THROW(simulate_pair(Coupling::cfd, bd.network, 0.1, -0.2, 5.0, rng), Error);
}

TEST(Coupling, PairsStartAtX0AndAreValidPaths) {
  const auto g = models::gene_expression(0.0116);
  for (Coupling c : kCouplings) {
    RngStream rng(3, 0);
    const CoupledTrajectory p = simulate_pair(c, g.network, 0.0116, 0.01, 10.0, rng);
    EXPECT_EQ(State(p.lo.state(0).begin(), p.lo.state(0).end()), g.network.x0());
    EXPECT_EQ(State(p.hi.state(0).begin(), p.hi.state(0).end()), g.network.x0());
    EXPECT_EQ(p.h, 0.01);
  }
}

TEST(Coupling, SharingIncreasesAsStepShrinks) {
  const auto bd = models::birth_death(0.1);
  auto sharing = [&](Coupling c, double h) {
    double total = 0.0;
    for (std::uint64_t i = 0; i < 2000; ++i) {
      RngStream rng(4, i);
      const CoupledTrajectory p = simulate_pair(c, bd.network, 0.1, h, 5.0, rng);
      if (c == Coupling::cfd) {
        const double distinct = static_cast<double>(p.lo.jump_count + p.hi.jump_count -
                                                    p.shared_firings);
        total += distinct == 0 ? 1.0 : static_cast<double>(p.shared_firings) / distinct;
      } else {
        total += common_prefix_fraction(p);
      }
    }
    return total / 2000;
  };
  for (Coupling c : kCouplings) {
    const double a = sharing(c, 0.1), b = sharing(c, 0.01), d = sharing(c, 0.001);
    EXPECT_LT(a, b) << to_string(c);
    EXPECT_LT(b, d) << to_string(c);
    EXPECT_GT(d, 0.9) << to_string(c);
  }
}

TEST(Coupling, MarginalsMatchUncoupledSimulation) {
  const auto bd = models::birth_death(0.1);
  const int n = 10000;
  Accumulator plain_lo, plain_hi;
  for (int i = 0; i < n; ++i) {
    RngStream a(100, static_cast<std::uint64_t>(i));
    RngStream b(101, static_cast<std::uint64_t>(i));
    plain_lo.add(static_cast<double>(
        simulate(bd.network, 0.1, 5.0, a, Recording::endpoint()).final_state[0]));
    plain_hi.add(static_cast<double>(
        simulate(bd.network, 0.15, 5.0, b, Recording::endpoint()).final_state[0]));
  }
  for (Coupling c : kCouplings) {
    Accumulator lo, hi;
    for (int i = 0; i < n; ++i) {
      RngStream rng(200, static_cast<std::uint64_t>(i));
      const CoupledTrajectory p =
          simulate_pair(c, bd.network, 0.1, 0.05, 5.0, rng, Recording::endpoint());
      lo.add(static_cast<double>(p.lo.final_state[0]));
      hi.add(static_cast<double>(p.hi.final_state[0]));
    }
    auto joint_se = [&](const Accumulator& a, const Accumulator& b) {
      return std::sqrt(a.variance() / n + b.variance() / n);
    };
    EXPECT_LT(std::abs(lo.mean - plain_lo.mean), 4 * joint_se(lo, plain_lo)) << to_string(c);
    EXPECT_LT(std::abs(hi.mean - plain_hi.mean), 4 * joint_se(hi, plain_hi)) << to_string(c);
  }
}

TEST(Coupling, CfdAndCrpBeatIndependentPairs) {
  const auto g = models::gene_expression(0.0116);
  auto variance = [&](Coupling c) {
    Accumulator acc;
    for (std::uint64_t i = 0; i < 10000; ++i) {
      RngStream rng(300, i);
      const CoupledTrajectory p =
          simulate_pair(c, g.network, 0.0116, 0.01, 10.0, rng, Recording::endpoint());
      acc.add((g.observable(p.hi.final_state) - g.observable(p.lo.final_state)) / 0.01);
    }
    return acc.variance();
  };
  const double indep = variance(Coupling::independent);
  EXPECT_LE(variance(Coupling::cfd), indep);
  EXPECT_LE(variance(Coupling::crp), indep);
}

TEST(Coupling, NextReactionMatchesDirectMethodInLaw) {
  const auto bd = models::birth_death(0.1);
  Accumulator direct, nrm;
  for (std::uint64_t i = 0; i < 20000; ++i) {
    RngStream a(400, i), b(401, i);
    direct.add(static_cast<double>(
        simulate(bd.network, 0.1, 5.0, a, Recording::endpoint()).final_state[0]));
    nrm.add(static_cast<double>(
        simulate_next_reaction(bd.network, 0.1, 5.0, b, Recording::endpoint()).final_state[0]));
  }
  const double se = std::sqrt(direct.variance() / 20000 + nrm.variance() / 20000);
  EXPECT_LT(std::abs(direct.mean - nrm.mean), 4 * se);
}

TEST(Coupling, DeterministicReplay) {
  const auto g = models::gene_expression(0.0116);
  for (Coupling c : kCouplings) {
    RngStream a(5, 5), b(5, 5);
    const CoupledTrajectory pa = simulate_pair(c, g.network, 0.0116, 0.01, 10.0, a);
    const CoupledTrajectory pb = simulate_pair(c, g.network, 0.0116, 0.01, 10.0, b);
    EXPECT_EQ(pa.lo.states, pb.lo.states);
    EXPECT_EQ(pa.hi.jump_times, pb.hi.jump_times);
  }
}
