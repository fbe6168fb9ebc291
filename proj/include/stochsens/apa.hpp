#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <variant>
#include <vector>

#include "stochsens/model.hpp"
#include "stochsens/rng.hpp"
#include "stochsens/sim.hpp"
#include "stochsens/trajectory.hpp"

// Unbiased sensitivity estimation from the exact sensitivity formula.
//
// For a path X of the process at theta with jump times sigma_0 = 0 <
// sigma_1 < ..., the per-path score is
//
//   s = sum_k [ int_0^T dlambda_k(X(t)) Df_k(X(t)) dt
//             + sum_{sigma_i < T} dlambda_k(X(sigma_i)) R(X(sigma_i), T - sigma_i, k) ]
//
// where dlambda_k is the theta-derivative of the k-th propensity, Df_k(x) =
// f(x + zeta_k) - f(x), and the correction R is an exponentially weighted
// integral of Psi(x + zeta_k, s) - Psi(x, s) - Df_k(x) with Psi(x, t) =
// E[f(X(t)) | X(0) = x]. When R is known in closed form the score is
// evaluated directly (score_exact). Otherwise R is replaced by an estimate
// that only needs Psi at a randomized time alpha (or, at an absorbing
// state, the time integral I of Psi); those quantities are in turn
// estimated from a set of auxiliary paths (AuxPathStore).

namespace stochsens {

// ---------------------------------------------------------------------------
// Base path bookkeeping

struct PathDecomposition {
  std::size_t eta = 0;     // last index with sigma_i < T
  std::vector<double> dt;  // holding times clipped at T, size eta + 1
};

inline PathDecomposition base_path_decompose(const Trajectory& traj, double T) {
  PathDecomposition out;
  std::size_t eta = 0;
  while (eta + 1 < traj.num_states() && traj.jump_times[eta + 1] < T) ++eta;
  out.eta = eta;
  out.dt.resize(eta + 1);
  for (std::size_t i = 0; i < eta; ++i)
    out.dt[i] = traj.jump_times[i + 1] - traj.jump_times[i];
  out.dt[eta] = std::max(T - traj.jump_times[eta], 0.0);
  return out;
}

namespace detail {

// sum_k dlambda_k(x) * Df_k
inline double drift_weight(const Kinetics& kin, const Observable& f,
                           StateView x) {
  double w = 0.0;
  for (std::size_t k = 0; k < kin.size(); ++k) {
    const double d = kin.dtheta(k, x);
    if (d != 0.0) w += d * f.increment(kin.stoich(k));
  }
  return w;
}

}  // namespace detail

/// int_0^T sum_k dlambda_k(X(t)) Df_k(X(t)) dt for a full trajectory.
/// Consecutive holding intervals with an identical weight are merged
/// before multiplying, so a constant weight yields exactly weight * T.
inline double pathwise_integral_term(const Trajectory& traj,
                                     const ReactionNetwork& net,
                                     const Observable& f, double T) {
  if (T <= 0.0) return 0.0;
  const Kinetics kin(net);
  const PathDecomposition dec = base_path_decompose(traj, T);
  double total = 0.0;
  double run_weight = detail::drift_weight(kin, f, traj.state(0));
  double run_start = 0.0;
  for (std::size_t i = 1; i <= dec.eta; ++i) {
    const double w = detail::drift_weight(kin, f, traj.state(i));
    if (w != run_weight) {
      total += run_weight * (traj.jump_times[i] - run_start);
      run_weight = w;
      run_start = traj.jump_times[i];
    }
  }
  return total + run_weight * (T - run_start);
}

// alpha = (remaining - gamma)^+ with gamma ~ Exp(total_rate), where
// remaining = T - sigma_i.
inline double draw_alpha(double total_rate, double T, double sigma,
                         RngStream& rng) {
  if (!(total_rate > 0.0))
    throw Error("draw_alpha needs a positive total propensity; use the "
                "absorbing-state branch instead");
  const double gamma = rng.exponential(total_rate);
  return std::max(T - sigma - gamma, 0.0);
}

// ---------------------------------------------------------------------------
// Providers of Psi / I / R

/// Closed-form solution of the backward equation for a specific model and
/// observable: Psi(x, t), I(x, t) = int_0^t Psi(x, s) ds and the correction
/// R(x, t, k).
struct AnalyticProvider {
  std::function<double(StateView, double)> psi;
  std::function<double(StateView, double)> integral;
  std::function<double(StateView, double, std::size_t)> correction;
};

struct APAConfig {
  std::size_t M = 50;    // auxiliary paths per sample
  double kappa = 3.0;    // auxiliary horizon = kappa * T
  SimOptions sim{};

  void check() const {
    if (M < 1) throw Error("APA needs at least one auxiliary path");
    if (!(kappa >= 1.0) || !std::isfinite(kappa))
      throw Error("APA extension factor must be >= 1");
  }
};

using RProvider = std::variant<AnalyticProvider, APAConfig>;

struct SampleScore {
  double value = 0.0;
};

/// Exact score with a closed-form correction R.
inline SampleScore score_exact(const ReactionNetwork& net, const Observable& f,
                               double T, const Trajectory& traj,
                               const AnalyticProvider& provider) {
  if (T <= 0.0) return {0.0};
  const Kinetics kin(net);
  const PathDecomposition dec = base_path_decompose(traj, T);
  double value = pathwise_integral_term(traj, net, f, T);
  for (std::size_t i = 0; i <= dec.eta; ++i) {
    const StateView x = traj.state(i);
    const double remaining = T - traj.jump_times[i];
    for (std::size_t k = 0; k < kin.size(); ++k) {
      const double d = kin.dtheta(k, x);
      if (d != 0.0) value += d * provider.correction(x, remaining, k);
    }
  }
  return {value};
}

// ---------------------------------------------------------------------------
// Query ledger

enum class QueryKind : std::uint8_t { psi, integral };

struct Query {
  QueryKind kind = QueryKind::psi;
  State x;
  double t = 0.0;
};

/// Every Psi/I value the estimated score needs, derived from one base path.
///
/// Each (i, k) with a non-zero theta-derivative of lambda_k at X(sigma_i)
/// contributes either two Psi slots (shifted and unshifted state, at alpha_i)
/// or, at an absorbing last state, one I slot. Identical (kind, x, t)
/// requests share one query. The score is direct + sum over slots of
/// weight * value of the slot's query.
struct QueryLedger {
  enum class Role : std::uint8_t { psi_shifted, psi_base, integral_shifted };

  struct Slot {
    std::size_t i = 0;
    std::size_t k = 0;
    Role role = Role::psi_shifted;
    double weight = 0.0;
    std::size_t query = 0;
  };

  double direct = 0.0;
  std::size_t eta = 0;
  std::vector<Query> queries;
  std::vector<double> values;
  std::vector<Slot> slots;

  std::size_t request(QueryKind kind, StateView x, double t) {
    auto key = std::make_tuple(static_cast<int>(kind), State(x.begin(), x.end()),
                               t);
    auto [it, inserted] = index_.try_emplace(std::move(key), queries.size());
    if (inserted) {
      queries.push_back({kind, State(x.begin(), x.end()), t});
      values.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    return it->second;
  }

  void add_slot(std::size_t i, std::size_t k, Role role, double weight,
                QueryKind kind, StateView x, double t) {
    slots.push_back({i, k, role, weight, request(kind, x, t)});
  }

  bool complete() const {
    for (const Slot& s : slots)
      if (std::isnan(values[s.query])) return false;
    return true;
  }

  double assemble() const {
    double value = direct;
    for (const Slot& s : slots) {
      const double v = values[s.query];
      if (std::isnan(v))
        throw Error("ledger slot (i=" + std::to_string(s.i) +
                    ", k=" + std::to_string(s.k) + ") was never resolved");
      value += s.weight * v;
    }
    return value;
  }

 private:
  std::map<std::tuple<int, State, double>, std::size_t> index_;
};

/// Builds the ledger for one base path: the directly computable part of the
/// score plus the Psi/I requests. alpha_i is drawn lazily, and only for
/// indices that produce requests.
inline QueryLedger plan_queries(const ReactionNetwork& net, const Observable& f,
                                double T, const Trajectory& traj,
                                RngStream& alpha_rng) {
  QueryLedger ledger;
  if (T <= 0.0) return ledger;
  const Kinetics kin(net);
  const PathDecomposition dec = base_path_decompose(traj, T);
  ledger.eta = dec.eta;
  State shifted(kin.dim());
  for (std::size_t i = 0; i <= dec.eta; ++i) {
    const StateView x = traj.state(i);
    const double total = kin.total(x);
    const double sigma = traj.jump_times[i];
    bool drawn = false;
    double alpha = 0.0;
    for (std::size_t k = 0; k < kin.size(); ++k) {
      const double d = kin.dtheta(k, x);
      if (d == 0.0) continue;
      const auto zeta = kin.stoich(k);
      for (std::size_t s = 0; s < shifted.size(); ++s) shifted[s] = x[s] + zeta[s];
      const double df = f.increment(zeta);
      if (total > 0.0) {
        if (!drawn) {
          alpha = draw_alpha(total, T, sigma, alpha_rng);
          drawn = true;
        }
        ledger.direct += d * df * (dec.dt[i] - 1.0 / total);
        ledger.add_slot(i, k, QueryLedger::Role::psi_shifted, d / total,
                        QueryKind::psi, shifted, alpha);
        ledger.add_slot(i, k, QueryLedger::Role::psi_base, -d / total,
                        QueryKind::psi, x, alpha);
      } else {
        // Absorbing state; only possible for the last index.
        ledger.direct -= d * dec.dt[i] * f(x);
        ledger.add_slot(i, k, QueryLedger::Role::integral_shifted, d,
                        QueryKind::integral, shifted, dec.dt[i]);
      }
    }
  }
  return ledger;
}

/// Fills every query of the ledger from a source offering psi(x, t) and
/// integral(x, t). Failures are rethrown with the slot that needed them.
template <class Source>
void resolve_queries(QueryLedger& ledger, Source& source) {
  for (std::size_t q = 0; q < ledger.queries.size(); ++q) {
    const Query& query = ledger.queries[q];
    try {
      ledger.values[q] = query.kind == QueryKind::psi
                             ? source.psi(query.x, query.t)
                             : source.integral(query.x, query.t);
    } catch (const std::exception& e) {
      for (const auto& s : ledger.slots)
        if (s.query == q)
          throw Error("estimating slot (i=" + std::to_string(s.i) +
                      ", k=" + std::to_string(s.k) + "): " + e.what());
      throw;
    }
  }
}

// Exact Psi/I values exposed as a query source.
class AnalyticSource {
 public:
  explicit AnalyticSource(AnalyticProvider p) : p_(std::move(p)) {}
  double psi(StateView x, double t) { return p_.psi(x, t); }
  double integral(StateView x, double t) { return p_.integral(x, t); }

 private:
  AnalyticProvider p_;
};

// ---------------------------------------------------------------------------
// Auxiliary paths

/// M independent paths from x0 on [0, kappa * T], with a hash index from
/// each visited state to the first time every path entered it. Keys are the
/// exact integer state vectors, stored in place inside the paths.
class AuxPathStore {
 public:
  struct Visit {
    std::uint32_t path;
    double time;
  };

  AuxPathStore(const ReactionNetwork& net, double T, const APAConfig& cfg,
               RngStream rng)
      : dim_(net.num_species()),
        horizon_(cfg.kappa * T),
        index_(64, KeyHash{dim_}, KeyEq{dim_}) {
    cfg.check();
    const Kinetics kin(net);
    paths_.reserve(cfg.M);
    for (std::size_t p = 0; p < cfg.M; ++p) {
      RngStream path_rng = rng.child(p);
      paths_.push_back(simulate_from(kin, net.x0(), horizon_, path_rng,
                                     Recording::all(), cfg.sim));
      jump_count_ += paths_.back().jump_count;
    }
    for (std::uint32_t p = 0; p < paths_.size(); ++p) {
      const Trajectory& path = paths_[p];
      for (std::size_t i = 0; i < path.num_states(); ++i) {
        const Count* key = path.states.data() + i * dim_;
        auto [it, inserted] = index_.try_emplace(key, kNone);
        const std::uint32_t head = it->second;
        // Entries of one path are pushed consecutively, so the head tells
        // whether this path has already been here.
        if (head != kNone && links_[head].visit.path == p) continue;
        links_.push_back({{p, path.jump_times[i]}, head});
        it->second = static_cast<std::uint32_t>(links_.size() - 1);
      }
    }
  }

  std::size_t num_paths() const { return paths_.size(); }
  const Trajectory& path(std::size_t p) const { return paths_.at(p); }
  double horizon() const { return horizon_; }
  std::uint64_t jump_count() const { return jump_count_; }
  std::size_t distinct_states() const { return index_.size(); }

  // First visits of x, at most one per path, in no particular order.
  std::vector<Visit> visits(StateView x) const {
    std::vector<Visit> out;
    if (x.size() != dim_) return out;
    for (Count v : x)
      if (v < 0) return out;
    auto it = index_.find(x.data());
    if (it == index_.end()) return out;
    for (std::uint32_t l = it->second; l != kNone; l = links_[l].next)
      out.push_back(links_[l].visit);
    return out;
  }

  // A visit at time s can answer a query of length t if the path is known
  // on [s, s + t]: inside the horizon, or anywhere after absorption.
  bool usable(const Visit& v, double t) const {
    return v.time + t <= horizon_ || paths_[v.path].absorbed;
  }

 private:
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  struct KeyHash {
    std::size_t dim;
    std::size_t operator()(const Count* key) const noexcept {
      std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ dim;
      for (std::size_t i = 0; i < dim; ++i)
        h = detail::mix64(h ^ static_cast<std::uint64_t>(key[i]));
      return static_cast<std::size_t>(h);
    }
  };
  struct KeyEq {
    std::size_t dim;
    bool operator()(const Count* a, const Count* b) const noexcept {
      return std::memcmp(a, b, dim * sizeof(Count)) == 0;
    }
  };
  struct Link {
    Visit visit;
    std::uint32_t next;
  };

  std::size_t dim_;
  double horizon_;
  std::vector<Trajectory> paths_;
  std::uint64_t jump_count_ = 0;
  std::unordered_map<const Count*, std::uint32_t, KeyHash, KeyEq> index_;
  std::vector<Link> links_;
};

inline AuxPathStore build_aux_store(const ReactionNetwork& net, double T,
                                    const APAConfig& cfg, RngStream rng) {
  return AuxPathStore(net, T, cfg, rng);
}

/// Psi/I estimates from an auxiliary store: the average over usable first
/// visits of x, or a single fresh path from x when no visit is usable.
class AuxPathEstimator {
 public:
  AuxPathEstimator(const AuxPathStore& store, const ReactionNetwork& net,
                   const Observable& f, RngStream fallback_rng,
                   SimOptions sim = {})
      : store_(store), kin_(net), f_(f), rng_(fallback_rng), sim_(sim) {}

  double psi(StateView x, double t) {
    if (t <= 0.0) return f_(x);
    double sum = 0.0;
    std::size_t m = 0;
    for (const auto& v : store_.visits(x)) {
      if (!store_.usable(v, t)) continue;
      sum += f_(store_.path(v.path).state_at(v.time + t));
      ++m;
    }
    if (m > 0) return sum / static_cast<double>(m);
    ++fallbacks_;
    const Trajectory fresh =
        simulate_from(kin_, x, t, rng_, Recording::endpoint(), sim_);
    fallback_jumps_ += fresh.jump_count;
    return f_(fresh.final_state);
  }

  double integral(StateView x, double t) {
    if (t <= 0.0) return 0.0;
    double sum = 0.0;
    std::size_t m = 0;
    for (const auto& v : store_.visits(x)) {
      if (!store_.usable(v, t)) continue;
      sum += store_.path(v.path).integrate(f_, v.time, v.time + t);
      ++m;
    }
    if (m > 0) return sum / static_cast<double>(m);
    ++fallbacks_;
    const Trajectory fresh = simulate_from(kin_, x, t, rng_, Recording::all(), sim_);
    fallback_jumps_ += fresh.jump_count;
    return fresh.integrate(f_, 0.0, t);
  }

  std::uint64_t fallbacks() const { return fallbacks_; }
  std::uint64_t fallback_jumps() const { return fallback_jumps_; }

 private:
  const AuxPathStore& store_;
  Kinetics kin_;
  const Observable& f_;
  RngStream rng_;
  SimOptions sim_;
  std::uint64_t fallbacks_ = 0;
  std::uint64_t fallback_jumps_ = 0;
};

inline double estimate_psi(const AuxPathStore& store, const ReactionNetwork& net,
                           const Observable& f, StateView x, double t,
                           RngStream& fallback_rng) {
  AuxPathEstimator est(store, net, f, fallback_rng.split());
  return est.psi(x, t);
}

inline double estimate_I(const AuxPathStore& store, const ReactionNetwork& net,
                         const Observable& f, StateView x, double t,
                         RngStream& fallback_rng) {
  AuxPathEstimator est(store, net, f, fallback_rng.split());
  return est.integral(x, t);
}

// ---------------------------------------------------------------------------
// Sample assembly

struct ApaDiagnostics {
  double score = 0.0;
  std::size_t eta = 0;
  std::size_t n_slots = 0;
  std::size_t n_queries = 0;
  std::uint64_t n_fallbacks = 0;
  std::uint64_t base_jumps = 0;
  std::uint64_t aux_jump_count = 0;  // auxiliary plus fallback paths
};

/// One score from a base path. With an analytic provider this is the exact
/// score; with an APAConfig the corrections are estimated from a fresh
/// auxiliary store. rng supplies the alpha draws, the auxiliary paths and
/// the fallback paths through independent child streams.
inline SampleScore score_sample(const ReactionNetwork& net, const Observable& f,
                                double T, const Trajectory& traj,
                                const RProvider& provider, const RngStream& rng,
                                ApaDiagnostics* diag = nullptr) {
  if (const auto* exact = std::get_if<AnalyticProvider>(&provider)) {
    SampleScore s = score_exact(net, f, T, traj, *exact);
    if (diag) {
      diag->score = s.value;
      diag->eta = T > 0.0 ? base_path_decompose(traj, T).eta : 0;
    }
    return s;
  }
  const APAConfig& cfg = std::get<APAConfig>(provider);
  RngStream alpha_rng = rng.child(1);
  QueryLedger ledger = plan_queries(net, f, T, traj, alpha_rng);
  std::uint64_t aux_jumps = 0, fallbacks = 0;
  if (!ledger.queries.empty()) {
    const AuxPathStore store(net, T, cfg, rng.child(2));
    AuxPathEstimator est(store, net, f, rng.child(3), cfg.sim);
    resolve_queries(ledger, est);
    aux_jumps = store.jump_count() + est.fallback_jumps();
    fallbacks = est.fallbacks();
  }
  if (!ledger.complete()) throw Error("query ledger incomplete after resolution");
  const SampleScore s{ledger.assemble()};
  if (diag) {
    diag->score = s.value;
    diag->eta = ledger.eta;
    diag->n_slots = ledger.slots.size();
    diag->n_queries = ledger.queries.size();
    diag->n_fallbacks = fallbacks;
    diag->aux_jump_count = aux_jumps;
  }
  return s;
}

/// One full APA realization: base path on [0, T] from x0, then the
/// estimated score.
inline SampleScore run_apa_sample(const ReactionNetwork& net,
                                  const Observable& f, double T,
                                  const APAConfig& cfg, const RngStream& rng,
                                  ApaDiagnostics* diag = nullptr) {
  cfg.check();
  RngStream base_rng = rng.child(0);
  const Trajectory base = simulate(net, net.theta(), T, base_rng,
                                   Recording::all(), cfg.sim);
  const SampleScore s = score_sample(net, f, T, base, cfg, rng, diag);
  if (diag) diag->base_jumps = base.jump_count;
  return s;
}

}  // namespace stochsens
