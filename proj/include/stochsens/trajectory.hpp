#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "stochsens/model.hpp"

namespace stochsens {

// What a simulation keeps: every jump, or only the states at a sorted list
// of absolute query times (possibly empty, i.e. just the final state).
struct Recording {
  bool full = true;
  std::vector<double> times;

  static Recording all() { return {}; }
  static Recording at(std::vector<double> times) {
    std::sort(times.begin(), times.end());
    return {false, std::move(times)};
  }
  static Recording endpoint() { return {false, {}}; }
};

/// One realization of the jump process on [0, t_end].
///
/// In full mode jump_times[0] = 0 and states[i] = X(jump_times[i]), stored
/// row-major with dim columns; reaction_ids[i] is the reaction that moved
/// states[i] to states[i+1]. In thinned mode only sample_times/sample_states
/// are populated. final_state and jump_count are always set.
struct Trajectory {
  std::size_t dim = 0;
  std::vector<double> jump_times;
  std::vector<Count> states;
  std::vector<std::uint32_t> reaction_ids;
  std::vector<double> sample_times;
  std::vector<Count> sample_states;
  State final_state;
  double t_end = 0.0;
  bool absorbed = false;
  std::uint64_t jump_count = 0;

  bool full() const { return !jump_times.empty(); }
  std::size_t num_jumps() const { return reaction_ids.size(); }
  std::size_t num_states() const { return jump_times.size(); }

  StateView state(std::size_t i) const {
    return {states.data() + i * dim, dim};
  }

  StateView sample(std::size_t j) const {
    return {sample_states.data() + j * dim, dim};
  }

  // Index of the last recorded state with jump time <= t (right-continuous).
  std::size_t index_at(double t) const {
    auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    return it == jump_times.begin() ? 0
                                    : static_cast<std::size_t>(
                                          it - jump_times.begin() - 1);
  }

  StateView state_at(double t) const { return state(index_at(t)); }

  // Exact integral of f(X(s)) over [a, b] for a full trajectory. The path
  // is held at its last state beyond the last recorded jump.
  double integrate(const Observable& f, double a, double b) const {
    if (b <= a) return 0.0;
    std::size_t i = index_at(a);
    double total = 0.0;
    double lo = a;
    while (lo < b) {
      const double hi =
          i + 1 < jump_times.size() ? std::min(jump_times[i + 1], b) : b;
      total += f(state(i)) * (hi - lo);
      lo = hi;
      ++i;
    }
    return total;
  }
};

// Observer that builds a Trajectory according to a Recording policy.
class TrajectoryRecorder {
 public:
  TrajectoryRecorder(std::size_t dim, Recording recording, double t_end)
      : recording_(std::move(recording)) {
    traj_.dim = dim;
    traj_.t_end = t_end;
  }

  void on_start(StateView x) {
    if (recording_.full) {
      traj_.jump_times.push_back(0.0);
      traj_.states.insert(traj_.states.end(), x.begin(), x.end());
    } else {
      last_.assign(x.begin(), x.end());
    }
  }

  void on_jump(double t, std::size_t k, StateView x) {
    ++traj_.jump_count;
    if (recording_.full) {
      traj_.jump_times.push_back(t);
      traj_.states.insert(traj_.states.end(), x.begin(), x.end());
      traj_.reaction_ids.push_back(static_cast<std::uint32_t>(k));
    } else {
      flush_before(t);
      if (next_ < recording_.times.size()) last_.assign(x.begin(), x.end());
    }
  }

  void on_end(double /*t_end*/, StateView x, bool absorbed) {
    traj_.absorbed = absorbed;
    traj_.final_state.assign(x.begin(), x.end());
    if (!recording_.full) {
      last_.assign(x.begin(), x.end());
      // Query times past the horizon are answered only for absorbed paths,
      // whose future is frozen.
      while (next_ < recording_.times.size() &&
             (recording_.times[next_] <= traj_.t_end || absorbed))
        push_sample(recording_.times[next_++]);
    }
  }

  Trajectory take() { return std::move(traj_); }

 private:
  void flush_before(double t) {
    while (next_ < recording_.times.size() && recording_.times[next_] < t)
      push_sample(recording_.times[next_++]);
  }

  void push_sample(double q) {
    traj_.sample_times.push_back(q);
    traj_.sample_states.insert(traj_.sample_states.end(), last_.begin(),
                               last_.end());
  }

  Recording recording_;
  Trajectory traj_;
  State last_;
  std::size_t next_ = 0;
};

// CSV dump: header t,reaction,s_0..s_{d-1}; an initial row (reaction -1),
// one row per jump with the post-jump state, and a final row at t_end
// unless the last row already sits there.
inline void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  out << "t,reaction";
  for (std::size_t s = 0; s < traj.dim; ++s) out << ",s_" << s;
  out << "\n";
  auto row = [&](double t, long long reaction, StateView x) {
    out << t << "," << reaction;
    for (Count v : x) out << "," << v;
    out << "\n";
  };
  const auto precision = out.precision(17);
  row(0.0, -1, traj.state(0));
  for (std::size_t i = 0; i < traj.num_jumps(); ++i)
    row(traj.jump_times[i + 1], traj.reaction_ids[i], traj.state(i + 1));
  if (traj.t_end > traj.jump_times.back())
    row(traj.t_end, -1, traj.state(traj.num_states() - 1));
  out.precision(precision);
}

}  // namespace stochsens
