#pragma once

#include <cstdint>
#include <string>

#include "stochsens/model.hpp"
#include "stochsens/rng.hpp"
#include "stochsens/sim.hpp"
#include "stochsens/trajectory.hpp"

// Likelihood-ratio (Girsanov) sensitivity estimator for a parameter that is
// the rate constant of exactly one reaction k0:
//
//   s = f(X(T)) * M(T) / theta,   M(T) = N_k0(T) - int_0^T lambda_k0(X(s)) ds.

namespace stochsens {

struct GirsanovScore {
  double value = 0.0;
  double martingale_terminal = 0.0;
  std::uint64_t firings = 0;
};

/// Index of the single reaction carrying the sensitive parameter. Throws
/// InapplicableError when the estimator cannot be used for this network.
inline std::size_t girsanov_reaction(const ReactionNetwork& net) {
  if (!(net.theta() > 0.0))
    throw InapplicableError(
        "Girsanov estimator inapplicable: theta = 0 (the weight divides by "
        "theta); use APA instead");
  std::size_t k0 = net.num_reactions();
  for (std::size_t k = 0; k < net.num_reactions(); ++k) {
    if (!net.depends_on_theta(k)) continue;
    if (k0 != net.num_reactions())
      throw InapplicableError("Girsanov estimator inapplicable: parameter '" +
                              net.sensitive() +
                              "' is the rate of more than one reaction");
    k0 = k;
  }
  if (k0 == net.num_reactions())
    throw InapplicableError("Girsanov estimator inapplicable: parameter '" +
                            net.sensitive() + "' is not used by any reaction");
  return k0;
}

/// Simulation observer accumulating N_k0 and the compensator on the fly, so
/// Girsanov samples need no stored trajectory.
class GirsanovObserver {
 public:
  GirsanovObserver(const Kinetics& kin, std::size_t k0) : kin_(kin), k0_(k0) {}

  void on_start(StateView x) {
    t_ = 0.0;
    rate_ = kin_.propensity(k0_, x);
  }
  void on_jump(double t, std::size_t k, StateView x) {
    compensator_ += rate_ * (t - t_);
    t_ = t;
    if (k == k0_) ++firings_;
    rate_ = kin_.propensity(k0_, x);
  }
  void on_end(double t_end, StateView x, bool /*absorbed*/) {
    compensator_ += rate_ * (t_end - t_);
    t_ = t_end;
    final_.assign(x.begin(), x.end());
  }

  GirsanovScore score(const Observable& f, double theta) const {
    GirsanovScore s;
    s.firings = firings_;
    s.martingale_terminal = static_cast<double>(firings_) - compensator_;
    s.value = f(final_) * s.martingale_terminal / theta;
    return s;
  }

 private:
  const Kinetics& kin_;
  std::size_t k0_;
  double t_ = 0.0;
  double rate_ = 0.0;
  double compensator_ = 0.0;
  std::uint64_t firings_ = 0;
  State final_;
};

/// Score from a fully recorded trajectory at the network's theta.
inline GirsanovScore score_girsanov(const ReactionNetwork& net,
                                    const Observable& f, double T,
                                    const Trajectory& traj) {
  const std::size_t k0 = girsanov_reaction(net);
  if (!traj.full())
    throw Error("score_girsanov needs a fully recorded trajectory");
  const Kinetics kin(net);
  GirsanovObserver obs(kin, k0);
  obs.on_start(traj.state(0));
  for (std::size_t i = 1; i < traj.num_states() && traj.jump_times[i] <= T; ++i)
    obs.on_jump(traj.jump_times[i], traj.reaction_ids[i - 1], traj.state(i));
  obs.on_end(T, traj.state_at(T), traj.absorbed);
  return obs.score(f, net.theta());
}

struct GirsanovSample {
  GirsanovScore score;
  std::uint64_t jumps = 0;
};

/// Simulates one path on [0, T] and scores it without recording it.
inline GirsanovSample run_girsanov_sample(const ReactionNetwork& net,
                                          const Observable& f, double T,
                                          RngStream& rng,
                                          const SimOptions& opt = {}) {
  const std::size_t k0 = girsanov_reaction(net);
  const Kinetics kin(net);
  State x = net.x0();
  GirsanovObserver obs(kin, k0);
  const SimStatus status = run_direct(kin, std::span<Count>(x), T, rng, obs, opt);
  return {obs.score(f, net.theta()), status.jumps};
}

}  // namespace stochsens
