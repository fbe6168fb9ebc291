#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stochsens/model_io.hpp"

namespace stochsens::models {

// 0 --theta--> S, X(0) = 0, f(x) = x.
inline ModelSpec pure_birth(double theta = 0.1, double horizon = 1.0) {
  ReactionNetwork net = NetworkBuilder()
                            .species("S", 0)
                            .parameter("theta", theta)
                            .sensitive("theta")
                            .reaction({}, {{"S", 1}}, "theta")
                            .build();
  return {net, Observable::species_count(1, 0), horizon};
}

// 0 --1--> S --theta--> 0, X(0) = 0, f(x) = x.
inline ModelSpec birth_death(double theta = 0.1, double horizon = 5.0) {
  ReactionNetwork net = NetworkBuilder()
                            .species("S", 0)
                            .parameter("birth", 1.0)
                            .parameter("theta", theta)
                            .sensitive("theta")
                            .reaction({}, {{"S", 1}}, "birth")
                            .reaction({{"S", 1}}, {}, "theta")
                            .build();
  return {net, Observable::species_count(1, 0), horizon};
}

// Gene transcription/translation with the lacA constants (per minute):
// G -> G + M (k_R), M -> M + P (k_P), M -> 0 (gamma_R), P -> 0 (gamma_P).
// The protein degradation rate gamma_P is the sensitive parameter and the
// observable is the protein count. One gene copy, no mRNA/protein at t=0.
inline ModelSpec gene_expression(double gamma_p = 0.0116,
                                 double horizon = 10.0) {
  ReactionNetwork net = NetworkBuilder()
                            .species("G", 1)
                            .species("M", 0)
                            .species("P", 0)
                            .parameter("k_R", 0.6)
                            .parameter("k_P", 1.7329)
                            .parameter("gamma_R", 0.3466)
                            .parameter("gamma_P", gamma_p)
                            .sensitive("gamma_P")
                            .reaction({{"G", 1}}, {{"G", 1}, {"M", 1}}, "k_R")
                            .reaction({{"M", 1}}, {{"M", 1}, {"P", 1}}, "k_P")
                            .reaction({{"M", 1}}, {}, "gamma_R")
                            .reaction({{"P", 1}}, {}, "gamma_P")
                            .build();
  return {net, Observable::species_count(3, 2), horizon};
}

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"pure-birth", "birth-death",
                                              "gene-expression"};
  return names;
}

inline std::optional<ModelSpec> builtin(const std::string& name) {
  if (name == "pure-birth") return pure_birth();
  if (name == "birth-death") return birth_death();
  if (name == "gene-expression") return gene_expression();
  return std::nullopt;
}

// Resolves "builtin:<name>" or a path to a model file.
inline ModelSpec load_model_or_builtin(const std::string& ref) {
  const std::string prefix = "builtin:";
  if (ref.rfind(prefix, 0) == 0) {
    auto spec = builtin(ref.substr(prefix.size()));
    if (!spec) throw ModelError("unknown built-in model '" + ref + "'");
    return *spec;
  }
  return load_model(ref);
}

}  // namespace stochsens::models
