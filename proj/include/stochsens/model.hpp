#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "stochsens/error.hpp"

namespace stochsens {

using Count = std::int64_t;
using State = std::vector<Count>;
using StateView = std::span<const Count>;

// Highest reactant order accepted for a single reaction.
inline constexpr int kMaxReactionOrder = 3;

struct Species {
  std::string name;
  std::size_t index = 0;
};

// One reaction channel with mass-action kinetics. Reactant and product
// lists are (species index, multiplicity) pairs sorted by species index;
// stoich is the dense displacement vector products - reactants.
struct Reaction {
  std::vector<std::pair<std::size_t, int>> reactants;
  std::vector<std::pair<std::size_t, int>> products;
  std::string rate_param;
  std::vector<Count> stoich;

  int order() const {
    int total = 0;
    for (const auto& [s, m] : reactants) total += m;
    return total;
  }

  int multiplicity(std::size_t species) const {
    for (const auto& [s, m] : reactants)
      if (s == species) return m;
    return 0;
  }

  Count net_change() const {
    Count total = 0;
    for (Count z : stoich) total += z;
    return total;
  }
};

struct ParameterSet {
  std::map<std::string, double> values;
  std::string sensitive;

  double value(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw ModelError("unknown parameter '" + name + "'");
    return it->second;
  }

  double theta() const { return value(sensitive); }
};

/// A chemical reaction network with mass-action propensities.
///
/// Immutable once built: species names are unique and contiguous from 0,
/// every rate parameter resolves, rates and initial counts are non-negative,
/// and no reaction exceeds order kMaxReactionOrder. Copies are cheap enough
/// to re-parameterize (with_theta) per estimator run.
class ReactionNetwork {
 public:
  ReactionNetwork(std::vector<std::string> species_names,
                  std::vector<Reaction> reactions, ParameterSet params,
                  State x0)
      : reactions_(std::move(reactions)),
        params_(std::move(params)),
        x0_(std::move(x0)) {
    if (species_names.empty()) throw ModelError("network has no species");
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < species_names.size(); ++i) {
      if (species_names[i].empty()) throw ModelError("empty species name");
      if (!seen.insert(species_names[i]).second)
        throw ModelError("duplicate species name '" + species_names[i] + "'");
      species_.push_back({species_names[i], i});
    }
    if (reactions_.empty()) throw ModelError("network has no reactions");
    if (x0_.size() != species_.size())
      throw ModelError("x0 has " + std::to_string(x0_.size()) +
                       " entries, expected " + std::to_string(species_.size()));
    for (std::size_t i = 0; i < x0_.size(); ++i)
      if (x0_[i] < 0)
        throw ModelError("negative initial count for species '" +
                         species_[i].name + "'");
    for (const auto& [name, v] : params_.values)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw ModelError("parameter '" + name +
                         "' must be finite and non-negative");
    if (!params_.values.contains(params_.sensitive))
      throw ModelError("sensitive parameter '" + params_.sensitive +
                       "' is not defined");
    const std::size_t d = species_.size();
    for (std::size_t k = 0; k < reactions_.size(); ++k) {
      Reaction& r = reactions_[k];
      const std::string where = "reaction " + std::to_string(k) + ": ";
      if (!params_.values.contains(r.rate_param))
        throw ModelError(where + "unknown parameter '" + r.rate_param + "'");
      normalize(r.reactants, d, where);
      normalize(r.products, d, where);
      if (r.order() > kMaxReactionOrder)
        throw ModelError(where + "order " + std::to_string(r.order()) +
                         " exceeds the maximum of " +
                         std::to_string(kMaxReactionOrder));
      if (r.stoich.empty()) {
        r.stoich.assign(d, 0);
        for (const auto& [s, m] : r.products) r.stoich[s] += m;
        for (const auto& [s, m] : r.reactants) r.stoich[s] -= m;
      } else if (r.stoich.size() != d) {
        throw ModelError(where + "stoichiometric vector has wrong length");
      }
    }
  }

  std::size_t num_species() const { return species_.size(); }
  std::size_t num_reactions() const { return reactions_.size(); }
  const std::vector<Species>& species() const { return species_; }
  const std::vector<Reaction>& reactions() const { return reactions_; }
  const Reaction& reaction(std::size_t k) const { return reactions_.at(k); }
  const ParameterSet& params() const { return params_; }
  const State& x0() const { return x0_; }
  double theta() const { return params_.theta(); }
  const std::string& sensitive() const { return params_.sensitive; }

  std::optional<std::size_t> species_index(const std::string& name) const {
    for (const auto& s : species_)
      if (s.name == name) return s.index;
    return std::nullopt;
  }

  double rate_constant(std::size_t k) const {
    return params_.value(reactions_.at(k).rate_param);
  }

  bool depends_on_theta(std::size_t k) const {
    return reactions_.at(k).rate_param == params_.sensitive;
  }

  // Copy with the sensitive parameter set to theta.
  ReactionNetwork with_theta(double theta) const {
    if (!(theta >= 0.0) || !std::isfinite(theta))
      throw ModelError("sensitive parameter must be finite and non-negative");
    ReactionNetwork copy = *this;
    copy.params_.values[copy.params_.sensitive] = theta;
    return copy;
  }

  // Copy with one existing parameter changed.
  ReactionNetwork with_param(const std::string& name, double value) const {
    if (!params_.values.contains(name))
      throw ModelError("unknown parameter '" + name + "'");
    if (!(value >= 0.0) || !std::isfinite(value))
      throw ModelError("parameter '" + name +
                       "' must be finite and non-negative");
    ReactionNetwork copy = *this;
    copy.params_.values[name] = value;
    return copy;
  }

  // Copy with a different parameter designated as sensitive.
  ReactionNetwork with_sensitive(const std::string& name) const {
    if (!params_.values.contains(name))
      throw ModelError("unknown parameter '" + name + "'");
    ReactionNetwork copy = *this;
    copy.params_.sensitive = name;
    return copy;
  }

  ReactionNetwork with_x0(State x0) const {
    return ReactionNetwork(species_names(), reactions_, params_, std::move(x0));
  }

  std::vector<std::string> species_names() const {
    std::vector<std::string> names;
    for (const auto& s : species_) names.push_back(s.name);
    return names;
  }

 private:
  static void normalize(std::vector<std::pair<std::size_t, int>>& terms,
                        std::size_t d, const std::string& where) {
    std::map<std::size_t, int> merged;
    for (const auto& [s, m] : terms) {
      if (s >= d) throw ModelError(where + "species index out of range");
      if (m < 0) throw ModelError(where + "negative multiplicity");
      merged[s] += m;
    }
    terms.clear();
    for (const auto& [s, m] : merged)
      if (m > 0) terms.emplace_back(s, m);
  }

  std::vector<Species> species_;
  std::vector<Reaction> reactions_;
  ParameterSet params_;
  State x0_;
};

// Name-based construction of a ReactionNetwork.
class NetworkBuilder {
 public:
  NetworkBuilder& species(std::string name, Count initial = 0) {
    names_.push_back(std::move(name));
    x0_.push_back(initial);
    return *this;
  }

  NetworkBuilder& parameter(std::string name, double value) {
    params_.values[std::move(name)] = value;
    return *this;
  }

  NetworkBuilder& sensitive(std::string name) {
    params_.sensitive = std::move(name);
    return *this;
  }

  NetworkBuilder& reaction(const std::map<std::string, int>& reactants,
                           const std::map<std::string, int>& products,
                           std::string rate) {
    Reaction r;
    r.reactants = resolve(reactants);
    r.products = resolve(products);
    r.rate_param = std::move(rate);
    reactions_.push_back(std::move(r));
    return *this;
  }

  ReactionNetwork build() const {
    return ReactionNetwork(names_, reactions_, params_, x0_);
  }

 private:
  std::vector<std::pair<std::size_t, int>> resolve(
      const std::map<std::string, int>& terms) const {
    std::vector<std::pair<std::size_t, int>> out;
    for (const auto& [name, m] : terms) {
      auto it = std::find(names_.begin(), names_.end(), name);
      if (it == names_.end())
        throw ModelError("unknown species '" + name + "'");
      out.emplace_back(static_cast<std::size_t>(it - names_.begin()), m);
    }
    return out;
  }

  std::vector<std::string> names_;
  State x0_;
  ParameterSet params_;
  std::vector<Reaction> reactions_;
};

// Affine observable f(x) = <coeffs, x> + offset.
struct Observable {
  std::vector<double> coeffs;
  double offset = 0.0;

  double operator()(StateView x) const {
    double v = offset;
    for (std::size_t i = 0; i < coeffs.size(); ++i)
      v += coeffs[i] * static_cast<double>(x[i]);
    return v;
  }

  // f(x + zeta) - f(x); independent of x for an affine f.
  double increment(std::span<const Count> zeta) const {
    double v = 0.0;
    for (std::size_t i = 0; i < coeffs.size(); ++i)
      v += coeffs[i] * static_cast<double>(zeta[i]);
    return v;
  }

  static Observable species_count(std::size_t d, std::size_t i) {
    Observable f;
    f.coeffs.assign(d, 0.0);
    f.coeffs.at(i) = 1.0;
    return f;
  }
};

/// Mass-action rates of a network frozen at one parameter value, laid out
/// for the simulation inner loops. No bounds checking; the checked entry
/// points are the free functions propensity()/propensity_dtheta() below.
class Kinetics {
 public:
  explicit Kinetics(const ReactionNetwork& net) : Kinetics(net, net.theta()) {}

  Kinetics(const ReactionNetwork& net, double theta) : dim_(net.num_species()) {
    const std::size_t K = net.num_reactions();
    rate_.resize(K);
    sensitive_.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
      const Reaction& r = net.reaction(k);
      sensitive_[k] = net.depends_on_theta(k);
      rate_[k] = sensitive_[k] ? theta : net.rate_constant(k);
      first_reactant_.push_back(reactants_.size());
      for (const auto& [s, m] : r.reactants)
        reactants_.push_back({static_cast<std::uint32_t>(s), m});
      first_change_.push_back(changes_.size());
      for (std::size_t s = 0; s < dim_; ++s)
        if (r.stoich[s] != 0)
          changes_.push_back({static_cast<std::uint32_t>(s), r.stoich[s]});
      stoich_.insert(stoich_.end(), r.stoich.begin(), r.stoich.end());
    }
    first_reactant_.push_back(reactants_.size());
    first_change_.push_back(changes_.size());
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return rate_.size(); }
  double rate_constant(std::size_t k) const { return rate_[k]; }
  bool sensitive(std::size_t k) const { return sensitive_[k]; }

  // Falling-factorial mass-action product (rate constant excluded).
  double combinations(std::size_t k, StateView x) const {
    double prod = 1.0;
    for (std::size_t j = first_reactant_[k]; j < first_reactant_[k + 1]; ++j) {
      const auto [s, m] = reactants_[j];
      const Count n = x[s];
      if (n < m) return 0.0;
      for (int q = 0; q < m; ++q) prod *= static_cast<double>(n - q);
    }
    return prod;
  }

  double propensity(std::size_t k, StateView x) const {
    if (rate_[k] == 0.0) return 0.0;
    return rate_[k] * combinations(k, x);
  }

  double dtheta(std::size_t k, StateView x) const {
    return sensitive_[k] ? combinations(k, x) : 0.0;
  }

  // Writes every propensity into out and returns their sum.
  double propensities(StateView x, std::span<double> out) const {
    double total = 0.0;
    for (std::size_t k = 0; k < rate_.size(); ++k) {
      out[k] = propensity(k, x);
      total += out[k];
    }
    return total;
  }

  double total(StateView x) const {
    double total = 0.0;
    for (std::size_t k = 0; k < rate_.size(); ++k) total += propensity(k, x);
    return total;
  }

  std::span<const Count> stoich(std::size_t k) const {
    return {stoich_.data() + k * dim_, dim_};
  }

  // x += zeta_k. Returns false if a component went negative.
  bool apply(std::size_t k, std::span<Count> x) const {
    bool ok = true;
    for (std::size_t j = first_change_[k]; j < first_change_[k + 1]; ++j) {
      const auto [s, dz] = changes_[j];
      x[s] += dz;
      ok &= x[s] >= 0;
    }
    return ok;
  }

 private:
  struct Term {
    std::uint32_t species;
    int multiplicity;
  };
  struct Change {
    std::uint32_t species;
    Count delta;
  };

  std::size_t dim_;
  std::vector<double> rate_;
  std::vector<bool> sensitive_;
  std::vector<Term> reactants_;
  std::vector<std::size_t> first_reactant_;
  std::vector<Change> changes_;
  std::vector<std::size_t> first_change_;
  std::vector<Count> stoich_;
};

namespace detail {

inline void check_state(const ReactionNetwork& net, std::size_t k,
                        StateView x) {
  if (k >= net.num_reactions())
    throw Error("reaction index " + std::to_string(k) + " out of range");
  if (x.size() != net.num_species())
    throw Error("state has wrong dimension");
  for (Count v : x)
    if (v < 0) throw Error("negative state component");
}

inline double mass_action_product(const Reaction& r, StateView x) {
  double prod = 1.0;
  for (const auto& [s, m] : r.reactants) {
    if (x[s] < m) return 0.0;
    for (int q = 0; q < m; ++q) prod *= static_cast<double>(x[s] - q);
  }
  return prod;
}

}  // namespace detail

// lambda_k(x, theta); theta_override replaces the sensitive rate constant.
inline double propensity(const ReactionNetwork& net, std::size_t k,
                         StateView x,
                         std::optional<double> theta_override = std::nullopt) {
  detail::check_state(net, k, x);
  double c = net.rate_constant(k);
  if (theta_override && net.depends_on_theta(k)) c = *theta_override;
  if (c == 0.0) return 0.0;
  return c * detail::mass_action_product(net.reaction(k), x);
}

// d lambda_k / d theta. Rates are linear in their constant, so this is the
// mass-action product for the sensitive reaction(s) and 0 elsewhere.
inline double propensity_dtheta(const ReactionNetwork& net, std::size_t k,
                                StateView x) {
  detail::check_state(net, k, x);
  if (!net.depends_on_theta(k)) return 0.0;
  return detail::mass_action_product(net.reaction(k), x);
}

inline double total_propensity(const ReactionNetwork& net, StateView x) {
  double total = 0.0;
  for (std::size_t k = 0; k < net.num_reactions(); ++k)
    total += propensity(net, k, x);
  return total;
}

// A failed regularity check. Non-negativity failures ('C') make the model
// unusable; population-growth failures ('D') come from a sufficient but
// not necessary test and are flagged for the caller to decide.
struct Violation {
  char condition = 'C';
  std::size_t reaction = 0;
  std::string message;

  bool blocking() const { return condition == 'C'; }
};

/// Static regularity checks on a network.
///
/// (C): a firing reaction must keep the state in the non-negative lattice;
/// under mass action this holds iff the stoichiometry is products minus
/// reactants and no species drops by more than its reactant multiplicity.
/// (D): every reaction that increases the total population must have
/// reactant order <= 1. Smoothness in theta and polynomial growth of the
/// rates hold for any mass-action network and are not reported.
inline std::vector<Violation> validate(const ReactionNetwork& net) {
  std::vector<Violation> out;
  const std::size_t d = net.num_species();
  for (std::size_t k = 0; k < net.num_reactions(); ++k) {
    const Reaction& r = net.reaction(k);
    std::vector<Count> expected(d, 0);
    for (const auto& [s, m] : r.products) expected[s] += m;
    for (const auto& [s, m] : r.reactants) expected[s] -= m;
    for (std::size_t s = 0; s < d; ++s) {
      if (r.stoich[s] < -static_cast<Count>(r.multiplicity(s))) {
        out.push_back({'C', k,
                       "species '" + net.species()[s].name +
                           "' can be driven negative"});
      } else if (r.stoich[s] != expected[s]) {
        out.push_back({'C', k,
                       "stoichiometry of species '" + net.species()[s].name +
                           "' disagrees with reactants/products"});
      }
    }
    if (r.net_change() > 0 && r.order() > 1)
      out.push_back({'D', k,
                     "population-increasing reaction has order " +
                         std::to_string(r.order()) + " > 1"});
  }
  return out;
}

}  // namespace stochsens
