#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "stochsens/coupling.hpp"
#include "stochsens/model.hpp"

// Forward finite-difference estimator (f(X_{theta+h}(T)) - f(X_theta(T))) / h
// over a coupled pair of paths. Biased by O(h); used as a baseline.

namespace stochsens {

struct FDConfig {
  double h = 0.0;  // 0 selects default_h(theta)
  Coupling coupling = Coupling::cfd;
  SimOptions sim{};
};

inline double default_h(double theta) { return 0.01 * std::max(theta, 1e-3); }

struct FDSample {
  double value = 0.0;
  std::uint64_t jumps = 0;  // both paths together
};

inline FDSample run_fd_sample(const ReactionNetwork& net, const Observable& f,
                              double T, const FDConfig& cfg, RngStream& rng) {
  const double theta = net.theta();
  const double h = cfg.h == 0.0 ? default_h(theta) : cfg.h;
  if (!(h > 0.0) || !std::isfinite(h))
    throw Error("finite-difference step h must be > 0");
  const CoupledTrajectory pair = simulate_pair(
      cfg.coupling, net, theta, h, T, rng, Recording::endpoint(), cfg.sim);
  return {(f(pair.hi.final_state) - f(pair.lo.final_state)) / h,
          pair.total_jumps()};
}

inline double score_fd(const ReactionNetwork& net, const Observable& f,
                       double T, const FDConfig& cfg, RngStream& rng) {
  return run_fd_sample(net, f, T, cfg, rng).value;
}

}  // namespace stochsens
