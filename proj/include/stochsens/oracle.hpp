#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stochsens/apa.hpp"
#include "stochsens/model.hpp"
#include "stochsens/ode.hpp"

// Exact reference values: closed forms for the single-species birth-death
// family, first-moment ODEs for affine networks, and a truncated
// chemical-master-equation solver for small state spaces.

namespace stochsens {

namespace detail {

// (1 - e^{-mu t}) / mu, equal to t at mu = 0.
inline double phi1(double mu, double t) {
  if (mu == 0.0) return t;
  return -std::expm1(-mu * t) / mu;
}

// int_0^t phi1(mu, s) ds = (t - phi1(mu, t)) / mu.
inline double phi2(double mu, double t) {
  const double z = mu * t;
  if (std::abs(z) < 1e-3)
    return t * t * (0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0);
  return (t - phi1(mu, t)) / mu;
}

// d/dmu phi1(mu, t).
inline double dphi1(double mu, double t) {
  const double z = mu * t;
  if (std::abs(z) < 0.5) {
    // sum_{n>=1} n (-mu)^{n-1} (-1) t^{n+1} / (n+1)!
    double term = t * t / 2.0;  // t^{n+1}/(n+1)! at n = 1
    double sum = 0.0;
    double power = 1.0;  // (-z)^{n-1}
    for (int n = 1; n < 30; ++n) {
      sum -= n * power * term;
      power *= -z;
      term /= (n + 2);
    }
    return sum;
  }
  return (z * std::exp(-z) + std::expm1(-z)) / (mu * mu);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Closed forms

enum class ClosedFormModel { pure_birth, birth_death };

/// Sensitivity of E[X(T)] for the paper's two closed-form examples with
/// X(0) = 0: pure birth (rate theta) gives T; birth-death (birth 1, death
/// theta per molecule) gives [theta T e^{-theta T} - (1 - e^{-theta T})] /
/// theta^2, evaluated by its power series near theta = 0.
inline double sensitivity_closed_form(ClosedFormModel model, double theta,
                                      double T) {
  if (!(theta >= 0.0)) throw Error("closed form needs theta >= 0");
  if (model == ClosedFormModel::pure_birth) return T;
  return detail::dphi1(theta, T);
}

/// A network of one species whose reactions are all plain births (0 -> S)
/// or plain deaths (S -> 0), observed through f(x) = c x + offset. The mean
/// is linear, so Psi, I and R have closed forms.
struct BirthDeathFamily {
  double birth = 0.0;   // B: total birth rate
  double death = 0.0;   // D: total per-molecule death rate
  double dbirth = 0.0;  // dB/dtheta
  double ddeath = 0.0;  // dD/dtheta
  Count x0 = 0;
  double c = 0.0;
  double offset = 0.0;
  std::vector<Count> zeta;  // +1 or -1 per reaction

  static std::optional<BirthDeathFamily> match(const ReactionNetwork& net,
                                               const Observable& f) {
    if (net.num_species() != 1) return std::nullopt;
    BirthDeathFamily fam;
    for (std::size_t k = 0; k < net.num_reactions(); ++k) {
      const Reaction& r = net.reaction(k);
      const double rate = net.rate_constant(k);
      const double d = net.depends_on_theta(k) ? 1.0 : 0.0;
      if (r.reactants.empty() && r.products.size() == 1 &&
          r.products[0].second == 1) {
        fam.birth += rate;
        fam.dbirth += d;
        fam.zeta.push_back(1);
      } else if (r.products.empty() && r.reactants.size() == 1 &&
                 r.reactants[0].second == 1) {
        fam.death += rate;
        fam.ddeath += d;
        fam.zeta.push_back(-1);
      } else {
        return std::nullopt;
      }
    }
    fam.x0 = net.x0()[0];
    fam.c = f.coeffs.empty() ? 0.0 : f.coeffs[0];
    fam.offset = f.offset;
    return fam;
  }

  double psi(double x, double t) const {
    return c * (x * std::exp(-death * t) + birth * detail::phi1(death, t)) +
           offset;
  }

  double integral(double x, double t) const {
    return c * (x * detail::phi1(death, t) + birth * detail::phi2(death, t)) +
           offset * t;
  }

  // int_0^t (Psi(x+z, s) - Psi(x, s) - c z) e^{-l0 (t-s)} ds with
  // Psi(x+z, s) - Psi(x, s) = c z e^{-D s}.
  double correction(double x, double t, std::size_t k) const {
    const double l0 = birth + death * x;
    const double lo = std::min(l0, death);
    const double weighted =
        std::exp(-lo * t) * detail::phi1(std::abs(l0 - death), t);
    return c * static_cast<double>(zeta[k]) * (weighted - detail::phi1(l0, t));
  }

  double mean(double T) const { return psi(static_cast<double>(x0), T); }

  double sensitivity(double T) const {
    const double x = static_cast<double>(x0);
    return c * (-x * T * std::exp(-death * T) * ddeath +
                dbirth * detail::phi1(death, T) +
                birth * detail::dphi1(death, T) * ddeath);
  }
};

/// Closed-form Psi/I/R for networks in the birth-death family; nullopt for
/// anything else.
inline std::optional<AnalyticProvider> analytic_provider(
    const ReactionNetwork& net, const Observable& f) {
  auto fam = BirthDeathFamily::match(net, f);
  if (!fam) return std::nullopt;
  auto shared = std::make_shared<BirthDeathFamily>(*fam);
  AnalyticProvider p;
  p.psi = [shared](StateView x, double t) {
    return shared->psi(static_cast<double>(x[0]), t);
  };
  p.integral = [shared](StateView x, double t) {
    return shared->integral(static_cast<double>(x[0]), t);
  };
  p.correction = [shared](StateView x, double t, std::size_t k) {
    return shared->correction(static_cast<double>(x[0]), t, k);
  };
  return p;
}

inline std::optional<double> closed_form_sensitivity(const ReactionNetwork& net,
                                                     const Observable& f,
                                                     double T) {
  auto fam = BirthDeathFamily::match(net, f);
  if (!fam) return std::nullopt;
  return fam->sensitivity(T);
}

// ---------------------------------------------------------------------------
// First-moment ODE

/// dmu/dt = A mu + b for networks whose propensities are affine in x, plus
/// the theta-derivative system dmu_theta/dt = A mu_theta + dA mu + db.
struct MomentODE {
  std::size_t d = 0;
  std::vector<double> A, b, dA, db;  // A, dA row-major d x d

  static MomentODE build(const ReactionNetwork& net) {
    MomentODE m;
    m.d = net.num_species();
    m.A.assign(m.d * m.d, 0.0);
    m.dA.assign(m.d * m.d, 0.0);
    m.b.assign(m.d, 0.0);
    m.db.assign(m.d, 0.0);
    for (std::size_t k = 0; k < net.num_reactions(); ++k) {
      const Reaction& r = net.reaction(k);
      if (r.order() > 1)
        throw InapplicableError(
            "moment ODE needs propensities affine in x; reaction " +
            std::to_string(k) + " has order " + std::to_string(r.order()));
      const double c = net.rate_constant(k);
      const double dc = net.depends_on_theta(k) ? 1.0 : 0.0;
      for (std::size_t i = 0; i < m.d; ++i) {
        const double z = static_cast<double>(r.stoich[i]);
        if (z == 0.0) continue;
        if (r.reactants.empty()) {
          m.b[i] += z * c;
          m.db[i] += z * dc;
        } else {
          const std::size_t s = r.reactants[0].first;
          m.A[i * m.d + s] += z * c;
          m.dA[i * m.d + s] += z * dc;
        }
      }
    }
    return m;
  }

  // Returns (mu(T), mu_theta(T)) concatenated.
  std::vector<double> solve(const State& x0, double T, double tol = 1e-10) const {
    std::vector<double> y(2 * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) y[i] = static_cast<double>(x0[i]);
    const OdeRhs rhs = [this](double, const std::vector<double>& v,
                              std::vector<double>& dv) {
      for (std::size_t i = 0; i < d; ++i) {
        double mu = b[i], mut = db[i];
        for (std::size_t j = 0; j < d; ++j) {
          mu += A[i * d + j] * v[j];
          mut += A[i * d + j] * v[d + j] + dA[i * d + j] * v[j];
        }
        dv[i] = mu;
        dv[d + i] = mut;
      }
    };
    return integrate_dopri5(rhs, std::move(y), 0.0, T, tol);
  }
};

inline double mean_ode(const ReactionNetwork& net, const Observable& f,
                       double T, double tol = 1e-10) {
  const MomentODE m = MomentODE::build(net);
  const auto y = m.solve(net.x0(), T, tol);
  double v = f.offset;
  for (std::size_t i = 0; i < m.d; ++i) v += f.coeffs[i] * y[i];
  return v;
}

inline double mean_sensitivity_ode(const ReactionNetwork& net,
                                   const Observable& f, double T,
                                   double tol = 1e-10) {
  const MomentODE m = MomentODE::build(net);
  const auto y = m.solve(net.x0(), T, tol);
  double v = 0.0;
  for (std::size_t i = 0; i < m.d; ++i) v += f.coeffs[i] * y[m.d + i];
  return v;
}

// ---------------------------------------------------------------------------
// Truncated chemical master equation

struct CmeDistribution {
  std::size_t dim = 0;
  std::vector<Count> states;  // row-major, one row per retained state
  std::vector<double> probs;
  double escaped = 0.0;       // mass that left the truncation box by time T

  double retained() const {
    double s = 0.0;
    for (double p : probs) s += p;
    return s;
  }
  double expectation(const Observable& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i)
      s += probs[i] * f(StateView(states.data() + i * dim, dim));
    return s;
  }
};

/// States reachable from x0 without any species exceeding cap, with the
/// transitions between them; transitions that would exceed the cap lead to
/// a single absorbing sink.
class CmeStateSpace {
 public:
  static constexpr std::size_t kSink = static_cast<std::size_t>(-1);

  CmeStateSpace(const ReactionNetwork& net, Count cap,
                std::size_t max_states = 100'000)
      : net_(net), dim_(net.num_species()) {
    if (cap < 0) throw Error("CME state cap must be >= 0");
    for (Count v : net.x0())
      if (v > cap) throw Error("CME state cap is below the initial state");
    const Kinetics structure(net, 1.0);
    std::map<State, std::size_t> index;
    std::deque<std::size_t> queue;
    auto intern = [&](const State& x) {
      auto [it, inserted] = index.try_emplace(x, index.size());
      if (inserted) {
        if (index.size() > max_states)
          throw Error("CME state space exceeds " + std::to_string(max_states) +
                      " states; lower the cap");
        states_.insert(states_.end(), x.begin(), x.end());
        queue.push_back(it->second);
      }
      return it->second;
    };
    intern(net.x0());
    State y(dim_);
    while (!queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      const State x(states_.begin() + i * dim_, states_.begin() + (i + 1) * dim_);
      for (std::size_t k = 0; k < net.num_reactions(); ++k) {
        if (structure.combinations(k, x) <= 0.0) continue;
        if (!net.depends_on_theta(k) && net.rate_constant(k) == 0.0) continue;
        y = x;
        structure.apply(k, y);
        bool inside = true;
        for (Count v : y) inside &= v <= cap;
        const std::size_t j = inside ? intern(y) : kSink;
        edges_.push_back({i, j, k});
      }
    }
  }

  std::size_t size() const { return states_.size() / dim_; }

  CmeDistribution solve(double theta, double T) const {
    if (!(T >= 0.0)) throw Error("CME horizon must be >= 0");
    const std::size_t n = size();
    const Kinetics kin(net_, theta);
    std::vector<double> rate(edges_.size()), out(n, 0.0);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      rate[e] = kin.propensity(edges_[e].reaction, state(edges_[e].from));
      out[edges_[e].from] += rate[e];
    }
    double lambda = 0.0;
    for (double o : out) lambda = std::max(lambda, o);

    // Uniformization: p(T) = sum_n Poisson(n; lambda T) P^n p(0), with
    // P = I + Q / lambda; index n is the sink.
    std::vector<double> v(n + 1, 0.0), next(n + 1), acc(n + 1, 0.0);
    v[0] = 1.0;
    const double lt = lambda * T;
    if (lt == 0.0) {
      acc = v;
    } else {
      const double log_lt = std::log(lt);
      const std::size_t n_terms = static_cast<std::size_t>(
          lt + 12.0 * std::sqrt(lt) + 40.0);
      for (std::size_t m = 0; m <= n_terms; ++m) {
        const double w = std::exp(-lt + static_cast<double>(m) * log_lt -
                                  std::lgamma(static_cast<double>(m) + 1.0));
        if (w > 0.0)
          for (std::size_t i = 0; i <= n; ++i) acc[i] += w * v[i];
        for (std::size_t i = 0; i < n; ++i) next[i] = v[i] * (1.0 - out[i] / lambda);
        next[n] = v[n];
        for (std::size_t e = 0; e < edges_.size(); ++e) {
          const auto& ed = edges_[e];
          const double flow = v[ed.from] * rate[e] / lambda;
          next[ed.to == kSink ? n : ed.to] += flow;
        }
        v.swap(next);
      }
    }
    CmeDistribution dist;
    dist.dim = dim_;
    dist.states = states_;
    dist.probs.assign(acc.begin(), acc.begin() + static_cast<std::ptrdiff_t>(n));
    dist.escaped = acc[n];
    return dist;
  }

 private:
  struct Edge {
    std::size_t from;
    std::size_t to;
    std::size_t reaction;
  };

  StateView state(std::size_t i) const {
    return {states_.data() + i * dim_, dim_};
  }

  const ReactionNetwork& net_;
  std::size_t dim_;
  std::vector<Count> states_;
  std::vector<Edge> edges_;
};

inline CmeDistribution cme_distribution(const ReactionNetwork& net,
                                        double theta, double T, Count cap) {
  return CmeStateSpace(net, cap).solve(theta, T);
}

struct CmeResult {
  double mean = 0.0;
  double sensitivity = 0.0;
  double escaped = 0.0;  // largest escaped mass over the evaluations
  std::size_t states = 0;
};

/// Mean of f(X(T)) from the truncated CME and its theta-derivative by a
/// central difference with step 1e-6 * max(theta, 1) (a second-order
/// one-sided difference when theta is closer to 0 than the step). Refuses
/// when more than max_escaped probability leaves the truncation box.
inline CmeResult cme_bruteforce(const ReactionNetwork& net, const Observable& f,
                                double T, double theta, Count cap,
                                double max_escaped = 1e-8) {
  if (!(theta >= 0.0)) throw Error("CME oracle needs theta >= 0");
  const CmeStateSpace space(net, cap);
  CmeResult res;
  res.states = space.size();
  auto eval = [&](double th) {
    const CmeDistribution d = space.solve(th, T);
    res.escaped = std::max(res.escaped, d.escaped);
    if (d.escaped > max_escaped)
      throw Error("CME truncation too tight: escaped mass " +
                  std::to_string(d.escaped) + " > " + std::to_string(max_escaped) +
                  " at cap " + std::to_string(cap));
    return d.expectation(f);
  };
  const double delta = 1e-6 * std::max(theta, 1.0);
  res.mean = eval(theta);
  if (theta >= delta) {
    res.sensitivity = (eval(theta + delta) - eval(theta - delta)) / (2.0 * delta);
  } else {
    res.sensitivity = (-3.0 * res.mean + 4.0 * eval(theta + delta) -
                       eval(theta + 2.0 * delta)) /
                      (2.0 * delta);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Best available oracle

struct OracleValue {
  double value = 0.0;
  std::string source;  // "closed-form", "ode", "cme"
};

/// Closed form if the network is in the birth-death family, else the moment
/// ODE if propensities are affine; nullopt otherwise.
inline std::optional<OracleValue> sensitivity_oracle(const ReactionNetwork& net,
                                                     const Observable& f,
                                                     double T) {
  if (auto v = closed_form_sensitivity(net, f, T)) return OracleValue{*v, "closed-form"};
  try {
    return OracleValue{mean_sensitivity_ode(net, f, T), "ode"};
  } catch (const InapplicableError&) {
    return std::nullopt;
  }
}

}  // namespace stochsens
