#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stochsens/model.hpp"
#include "stochsens/rng.hpp"
#include "stochsens/trajectory.hpp"

namespace stochsens {

// Runaway-model guard: maximum number of jumps in one path.
inline constexpr std::uint64_t kDefaultJumpCap = 100'000'000;

struct SimOptions {
  std::uint64_t jump_cap = kDefaultJumpCap;
};

struct SimStatus {
  std::uint64_t jumps = 0;
  bool absorbed = false;
};

// Observer that ignores everything; useful for counting jumps only.
struct NullObserver {
  void on_start(StateView) {}
  void on_jump(double, std::size_t, StateView) {}
  void on_end(double, StateView, bool) {}
};

namespace detail {

// Categorical draw over propensities; u in [0, 1).
inline std::size_t pick_channel(std::span<const double> props, double total,
                                double u) {
  const double target = u * total;
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < props.size(); ++k) {
    if (props[k] <= 0.0) continue;
    cumulative += props[k];
    last_positive = k;
    if (target < cumulative) return k;
  }
  return last_positive;  // rounding left target at the very top
}

[[noreturn]] inline void throw_jump_cap(std::uint64_t cap) {
  throw SimulationError("jump cap of " + std::to_string(cap) +
                        " exceeded; the model looks like it runs away");
}

[[noreturn]] inline void throw_negative(std::size_t k) {
  throw SimulationError("reaction " + std::to_string(k) +
                        " drove the state negative");
}

}  // namespace detail

/// Gillespie direct method from state x (updated in place) over
/// (0, t_end]. Each jump costs one exponential holding time and one
/// categorical reaction draw, both from rng. Stops early when the total
/// propensity vanishes (absorbing state).
template <class Observer>
SimStatus run_direct(const Kinetics& kin, std::span<Count> x, double t_end,
                     RngStream& rng, Observer& obs,
                     const SimOptions& opt = {}) {
  std::vector<double> props(kin.size());
  SimStatus status;
  obs.on_start(x);
  double t = 0.0;
  for (;;) {
    const double total = kin.propensities(x, props);
    if (total <= 0.0) {
      status.absorbed = true;
      break;
    }
    const double tau = rng.exponential(total);
    const std::size_t k = detail::pick_channel(props, total, rng.uniform());
    if (t + tau > t_end) break;
    t += tau;
    if (!kin.apply(k, x)) detail::throw_negative(k);
    if (++status.jumps > opt.jump_cap) detail::throw_jump_cap(opt.jump_cap);
    obs.on_jump(t, k, x);
  }
  obs.on_end(t_end, x, status.absorbed);
  return status;
}

// Simulates from an arbitrary initial state with a prepared Kinetics.
inline Trajectory simulate_from(const Kinetics& kin, StateView x0,
                                double t_end, RngStream& rng,
                                const Recording& recording = Recording::all(),
                                const SimOptions& opt = {}) {
  State x(x0.begin(), x0.end());
  TrajectoryRecorder rec(kin.dim(), recording, t_end);
  run_direct(kin, std::span<Count>(x), t_end, rng, rec, opt);
  return rec.take();
}

/// Exact realization of the network's Markov process at parameter value
/// theta on [0, t_end], started from the network's x0.
inline Trajectory simulate(const ReactionNetwork& net, double theta,
                           double t_end, RngStream& rng,
                           const Recording& recording = Recording::all(),
                           const SimOptions& opt = {}) {
  if (!(t_end >= 0.0)) throw Error("simulation horizon must be >= 0");
  return simulate_from(Kinetics(net, theta), net.x0(), t_end, rng, recording,
                       opt);
}

}  // namespace stochsens
