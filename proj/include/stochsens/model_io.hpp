#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "stochsens/model.hpp"

namespace stochsens {

// Everything a model file carries: the network, the observable and the
// observation horizon T.
struct ModelSpec {
  ReactionNetwork network;
  Observable observable;
  double horizon = 1.0;
};

namespace detail {

using nlohmann::json;

inline std::size_t line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

inline const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ModelError(std::string("missing field '") + key + "'");
  return *it;
}

inline std::map<std::string, int> read_terms(const json& j,
                                             const std::string& field) {
  if (!j.is_object()) throw ModelError(field + ": expected an object");
  std::map<std::string, int> out;
  for (const auto& [name, v] : j.items()) {
    if (!v.is_number_integer())
      throw ModelError(field + "." + name + ": expected an integer");
    const auto m = v.get<long long>();
    if (m < 0) throw ModelError(field + "." + name + ": negative multiplicity");
    out[name] = static_cast<int>(m);
  }
  return out;
}

}  // namespace detail

/// Parses a model document. Errors carry the offending field path (and the
/// line number for syntax errors).
inline ModelSpec parse_model(const std::string& text) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelError("line " + std::to_string(detail::line_of(text, e.byte)) +
                     ": " + e.what());
  }
  try {
    if (!doc.is_object()) throw ModelError("top level must be an object");

    std::vector<std::string> names;
    for (const auto& s : detail::require(doc, "species")) {
      if (!s.is_string()) throw ModelError("species: names must be strings");
      names.push_back(s.get<std::string>());
    }
    for (std::size_t i = 0; i < names.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (names[i] == names[j])
          throw ModelError("species: duplicate species name '" + names[i] +
                           "'");

    State x0;
    for (const auto& v : detail::require(doc, "x0")) {
      if (!v.is_number_integer()) throw ModelError("x0: expected integers");
      x0.push_back(v.get<Count>());
      if (x0.back() < 0) throw ModelError("x0: negative count");
    }
    if (x0.size() != names.size())
      throw ModelError("x0: length does not match species");

    ParameterSet params;
    for (const auto& [name, v] : detail::require(doc, "params").items()) {
      if (!v.is_number()) throw ModelError("params." + name + ": expected a number");
      params.values[name] = v.get<double>();
      if (params.values[name] < 0.0)
        throw ModelError("params." + name + ": negative rate");
    }
    params.sensitive = detail::require(doc, "sensitive").get<std::string>();
    if (!params.values.contains(params.sensitive))
      throw ModelError("sensitive: unknown parameter '" + params.sensitive + "'");

    NetworkBuilder builder;
    for (std::size_t i = 0; i < names.size(); ++i)
      builder.species(names[i], x0[i]);
    for (const auto& [n, v] : params.values) builder.parameter(n, v);
    builder.sensitive(params.sensitive);

    const json& reactions = detail::require(doc, "reactions");
    if (!reactions.is_array()) throw ModelError("reactions: expected a list");
    for (std::size_t k = 0; k < reactions.size(); ++k) {
      const std::string field = "reactions[" + std::to_string(k) + "]";
      const json& r = reactions[k];
      auto reactants = r.contains("reactants")
                           ? detail::read_terms(r["reactants"], field + ".reactants")
                           : std::map<std::string, int>{};
      auto products = r.contains("products")
                          ? detail::read_terms(r["products"], field + ".products")
                          : std::map<std::string, int>{};
      for (const auto* terms : {&reactants, &products})
        for (const auto& [name, m] : *terms)
          if (std::find(names.begin(), names.end(), name) == names.end())
            throw ModelError(field + ": unknown species '" + name + "'");
      if (!r.contains("rate") || !r["rate"].is_string())
        throw ModelError(field + ".rate: expected a parameter name");
      const auto rate = r["rate"].get<std::string>();
      if (!params.values.contains(rate))
        throw ModelError(field + ".rate: unknown parameter '" + rate + "'");
      builder.reaction(reactants, products, rate);
    }

    ReactionNetwork net = builder.build();

    Observable f;
    f.coeffs.assign(names.size(), 0.0);
    const json& obs = detail::require(doc, "observable");
    if (obs.contains("coeffs")) {
      for (const auto& [name, v] : obs["coeffs"].items()) {
        auto idx = net.species_index(name);
        if (!idx) throw ModelError("observable.coeffs: unknown species '" + name + "'");
        f.coeffs[*idx] = v.get<double>();
        if (!std::isfinite(f.coeffs[*idx]))
          throw ModelError("observable.coeffs." + name + ": not finite");
      }
    }
    f.offset = obs.value("offset", 0.0);

    const double horizon = detail::require(doc, "T").get<double>();
    if (!(horizon >= 0.0) || !std::isfinite(horizon))
      throw ModelError("T: must be a finite non-negative time");
    return ModelSpec{std::move(net), std::move(f), horizon};
  } catch (const detail::json::exception& e) {
    throw ModelError(std::string("model schema: ") + e.what());
  }
}

inline ModelSpec load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_model(buf.str());
  } catch (const ModelError& e) {
    throw ModelError(path + ": " + e.what());
  }
}

// Canonical JSON form: keys sorted, 2-space indent, trailing newline.
inline std::string serialize_model(const ModelSpec& spec) {
  using detail::json;
  const ReactionNetwork& net = spec.network;
  const auto& sp = net.species();
  json doc = json::object();
  json names = json::array();
  for (const auto& s : sp) names.push_back(s.name);
  doc["species"] = names;
  doc["x0"] = net.x0();
  json params = json::object();
  for (const auto& [n, v] : net.params().values) params[n] = v;
  doc["params"] = params;
  doc["sensitive"] = net.sensitive();
  json reactions = json::array();
  for (const auto& r : net.reactions()) {
    json jr = json::object();
    json reac = json::object(), prod = json::object();
    for (const auto& [s, m] : r.reactants) reac[sp[s].name] = m;
    for (const auto& [s, m] : r.products) prod[sp[s].name] = m;
    jr["reactants"] = reac;
    jr["products"] = prod;
    jr["rate"] = r.rate_param;
    reactions.push_back(jr);
  }
  doc["reactions"] = reactions;
  json coeffs = json::object();
  for (std::size_t i = 0; i < sp.size(); ++i)
    if (i < spec.observable.coeffs.size() && spec.observable.coeffs[i] != 0.0)
      coeffs[sp[i].name] = spec.observable.coeffs[i];
  doc["observable"] = json{{"coeffs", coeffs}, {"offset", spec.observable.offset}};
  doc["T"] = spec.horizon;
  return doc.dump(2) + "\n";
}

inline void save_model(const ModelSpec& spec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write model file '" + path + "'");
  out << serialize_model(spec);
}

}  // namespace stochsens
