#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "stochsens/sim.hpp"

namespace stochsens {

enum class Coupling { cfd, crp, crn, independent };

inline const char* to_string(Coupling c) {
  switch (c) {
    case Coupling::cfd: return "cfd";
    case Coupling::crp: return "crp";
    case Coupling::crn: return "crn";
    case Coupling::independent: return "independent";
  }
  return "?";
}

// Two paths of the same network, at theta (lo) and theta + h (hi), built on
// shared randomness. shared_firings counts jumps that moved both paths at
// once (only the split-propensity coupling has such joint jumps).
struct CoupledTrajectory {
  Trajectory lo;
  Trajectory hi;
  double h = 0.0;
  std::uint64_t shared_firings = 0;

  std::uint64_t total_jumps() const { return lo.jump_count + hi.jump_count; }
};

namespace detail {

inline void check_pair_args(double theta, double h, double t_end) {
  if (h == 0.0) throw Error("coupled simulation needs h != 0");
  if (!(theta >= 0.0) || !(theta + h >= 0.0))
    throw Error("coupled simulation needs theta >= 0 and theta + h >= 0");
  if (!(t_end >= 0.0)) throw Error("simulation horizon must be >= 0");
}

}  // namespace detail

/// Random-time-change simulation with one unit-rate Poisson clock per
/// channel (modified next reaction method). channels[k] supplies the unit
/// exponential gaps of channel k's clock; two calls given copies of the same
/// channel streams realize the same Poisson processes Y_k.
template <class Observer>
SimStatus run_next_reaction(const Kinetics& kin, std::span<Count> x,
                            double t_end, std::vector<RngStream> channels,
                            Observer& obs, const SimOptions& opt = {}) {
  const std::size_t K = kin.size();
  std::vector<double> props(K), internal(K, 0.0), next(K);
  for (std::size_t k = 0; k < K; ++k) next[k] = channels[k].unit_exponential();
  SimStatus status;
  obs.on_start(x);
  double t = 0.0;
  for (;;) {
    kin.propensities(x, props);
    double dt = std::numeric_limits<double>::infinity();
    std::size_t mu = K;
    for (std::size_t k = 0; k < K; ++k) {
      if (props[k] <= 0.0) continue;
      const double cand = (next[k] - internal[k]) / props[k];
      if (cand < dt) {
        dt = cand;
        mu = k;
      }
    }
    if (mu == K) {
      status.absorbed = true;
      break;
    }
    if (t + dt > t_end) break;
    t += dt;
    for (std::size_t k = 0; k < K; ++k) internal[k] += props[k] * dt;
    internal[mu] = next[mu];
    next[mu] += channels[mu].unit_exponential();
    if (!kin.apply(mu, x)) detail::throw_negative(mu);
    if (++status.jumps > opt.jump_cap) detail::throw_jump_cap(opt.jump_cap);
    obs.on_jump(t, mu, x);
  }
  obs.on_end(t_end, x, status.absorbed);
  return status;
}

inline std::vector<RngStream> channel_streams(const RngStream& rng,
                                              std::size_t K) {
  std::vector<RngStream> out;
  out.reserve(K);
  for (std::size_t k = 0; k < K; ++k) out.push_back(rng.child(k));
  return out;
}

// Single path via the next reaction method; same law as simulate().
inline Trajectory simulate_next_reaction(
    const ReactionNetwork& net, double theta, double t_end, RngStream& rng, const Recording& recording = Recording::all(),
    const SimOptions& opt = {}) {
  const Kinetics kin(net, theta);
  State x = net.x0();
  TrajectoryRecorder rec(kin.dim(), recording, t_end);
  run_next_reaction(kin, std::span<Count>(x), t_end,
                    channel_streams(rng.split(), kin.size()), rec, opt);
  return rec.take();
}

/// Split-propensity coupling. Per reaction k the joint chain has a shared
/// channel with rate min(lambda_k(x_lo, theta), lambda_k(x_hi, theta + h))
/// moving both paths, and two residual channels moving one path each.
/// Simulated by the direct method over the 3K channels.
inline CoupledTrajectory simulate_cfd_pair(
    const ReactionNetwork& net, double theta, double h, double t_end,
    RngStream& rng, const Recording& recording = Recording::all(),
    const SimOptions& opt = {}) {
  detail::check_pair_args(theta, h, t_end);
  const Kinetics lo(net, theta), hi(net, theta + h);
  const std::size_t K = lo.size();
  State xlo = net.x0(), xhi = net.x0();
  TrajectoryRecorder rec_lo(lo.dim(), recording, t_end);
  TrajectoryRecorder rec_hi(hi.dim(), recording, t_end);
  std::vector<double> props(3 * K);
  std::uint64_t shared = 0, jumps = 0;
  rec_lo.on_start(xlo);
  rec_hi.on_start(xhi);
  double t = 0.0;
  for (;;) {
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double a = lo.propensity(k, xlo);
      const double b = hi.propensity(k, xhi);
      const double m = std::min(a, b);
      props[k] = m;
      props[K + k] = a - m;
      props[2 * K + k] = b - m;
      total += a + b - m;
    }
    if (total <= 0.0) break;
    const double tau = rng.exponential(total);
    const std::size_t c = detail::pick_channel(props, total, rng.uniform());
    if (t + tau > t_end) break;
    t += tau;
    const std::size_t k = c % K;
    const std::size_t group = c / K;
    if (++jumps > opt.jump_cap) detail::throw_jump_cap(opt.jump_cap);
    if (group != 2) {
      if (!lo.apply(k, xlo)) detail::throw_negative(k);
      rec_lo.on_jump(t, k, xlo);
    }
    if (group != 1) {
      if (!hi.apply(k, xhi)) detail::throw_negative(k);
      rec_hi.on_jump(t, k, xhi);
    }
    if (group == 0) ++shared;
  }
  rec_lo.on_end(t_end, xlo, lo.total(xlo) <= 0.0);
  rec_hi.on_end(t_end, xhi, hi.total(xhi) <= 0.0);
  return {rec_lo.take(), rec_hi.take(), h, shared};
}

/// Common reaction paths: both paths are driven by the same K unit-rate
/// Poisson processes through the random time change.
inline CoupledTrajectory simulate_crp_pair(
    const ReactionNetwork& net, double theta, double h, double t_end,
    RngStream& rng, const Recording& recording = Recording::all(),
    const SimOptions& opt = {}) {
  detail::check_pair_args(theta, h, t_end);
  const Kinetics lo(net, theta), hi(net, theta + h);
  const auto channels = channel_streams(rng.split(), lo.size());
  State xlo = net.x0(), xhi = net.x0();
  TrajectoryRecorder rec_lo(lo.dim(), recording, t_end);
  TrajectoryRecorder rec_hi(hi.dim(), recording, t_end);
  run_next_reaction(lo, std::span<Count>(xlo), t_end, channels, rec_lo, opt);
  run_next_reaction(hi, std::span<Count>(xhi), t_end, channels, rec_hi, opt);
  return {rec_lo.take(), rec_hi.take(), h, 0};
}

/// Common reaction numbers: both direct-method paths consume the same
/// uniform stream, draw for draw.
inline CoupledTrajectory simulate_crn_pair(
    const ReactionNetwork& net, double theta, double h, double t_end,
    RngStream& rng, const Recording& recording = Recording::all(),
    const SimOptions& opt = {}) {
  detail::check_pair_args(theta, h, t_end);
  const Kinetics lo(net, theta), hi(net, theta + h);
  RngStream rng_lo = rng.split();
  RngStream rng_hi = rng_lo;
  State xlo = net.x0(), xhi = net.x0();
  TrajectoryRecorder rec_lo(lo.dim(), recording, t_end);
  TrajectoryRecorder rec_hi(hi.dim(), recording, t_end);
  run_direct(lo, std::span<Count>(xlo), t_end, rng_lo, rec_lo, opt);
  run_direct(hi, std::span<Count>(xhi), t_end, rng_hi, rec_hi, opt);
  return {rec_lo.take(), rec_hi.take(), h, 0};
}

// Baseline: the two paths are simulated independently.
inline CoupledTrajectory simulate_independent_pair(
    const ReactionNetwork& net, double theta, double h, double t_end,
    RngStream& rng, const Recording& recording = Recording::all(),
    const SimOptions& opt = {}) {
  detail::check_pair_args(theta, h, t_end);
  RngStream rng_lo = rng.split();
  RngStream rng_hi = rng.split();
  return {simulate(net, theta, t_end, rng_lo, recording, opt),
          simulate(net, theta + h, t_end, rng_hi, recording, opt), h, 0};
}

inline CoupledTrajectory simulate_pair(
    Coupling coupling, const ReactionNetwork& net, double theta, double h,
    double t_end, RngStream& rng,
    const Recording& recording = Recording::all(), const SimOptions& opt = {}) {
  switch (coupling) {
    case Coupling::cfd:
      return simulate_cfd_pair(net, theta, h, t_end, rng, recording, opt);
    case Coupling::crp:
      return simulate_crp_pair(net, theta, h, t_end, rng, recording, opt);
    case Coupling::crn:
      return simulate_crn_pair(net, theta, h, t_end, rng, recording, opt);
    case Coupling::independent:
      return simulate_independent_pair(net, theta, h, t_end, rng, recording,
                                       opt);
  }
  throw Error("unknown coupling");
}

// Fraction of the longer reaction sequence on which both paths agree
// before their first differing reaction (1 when neither path jumped).
inline double common_prefix_fraction(const CoupledTrajectory& pair) {
  const auto& a = pair.lo.reaction_ids;
  const auto& b = pair.hi.reaction_ids;
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  std::size_t n = 0;
  while (n < a.size() && n < b.size() && a[n] == b[n]) ++n;
  return static_cast<double>(n) / static_cast<double>(longest);
}

}  // namespace stochsens
