#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "stochsens/apa.hpp"
#include "stochsens/fdiff.hpp"
#include "stochsens/girsanov.hpp"
#include "stochsens/oracle.hpp"
#include "stochsens/stats.hpp"

// Per-sample score sources for every estimator, in the form the stopping
// rule consumes: sample i is computed from the random stream (seed, i).

namespace stochsens {

enum class Method { apa, apa_exact, girsanov, cfd, crp, crn, independent };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::apa: return "apa";
    case Method::apa_exact: return "apa-exact";
    case Method::girsanov: return "girsanov";
    case Method::cfd: return "cfd";
    case Method::crp: return "crp";
    case Method::crn: return "crn";
    case Method::independent: return "independent";
  }
  return "?";
}

inline Method parse_method(const std::string& name) {
  for (Method m : {Method::apa, Method::apa_exact, Method::girsanov, Method::cfd,
                   Method::crp, Method::crn, Method::independent})
    if (name == to_string(m)) return m;
  throw Error("unknown method '" + name +
              "' (expected apa, apa-exact, girsanov, cfd, crp, crn or "
              "independent)");
}

inline bool is_finite_difference(Method m) {
  return m == Method::cfd || m == Method::crp || m == Method::crn ||
         m == Method::independent;
}

struct MethodOptions {
  APAConfig apa{};
  double h = 0.0;  // 0 selects default_h(theta)
  SimOptions sim{};
};

/// Collects APA per-sample diagnostics keyed by sample index (thread-safe).
class DiagnosticsLog {
 public:
  void record(std::uint64_t index, const ApaDiagnostics& d) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (entries_.size() <= index) entries_.resize(index + 1);
    entries_[index] = d;
  }
  // Entries for samples [0, n) in index order.
  std::vector<ApaDiagnostics> first(std::uint64_t n) const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<ApaDiagnostics> out;
    for (std::uint64_t i = 0; i < n && i < entries_.size(); ++i)
      if (entries_[i]) out.push_back(*entries_[i]);
    return out;
  }

 private:
  mutable std::mutex mutex_;
  std::vector<std::optional<ApaDiagnostics>> entries_;
};

/// Builds the sampler for one estimator. Preconditions of the method
/// (Girsanov applicability, availability of closed-form R, h > 0) are
/// checked here, before any sample is drawn.
inline Sampler make_sampler(Method method, const ReactionNetwork& network,
                            const Observable& observable, double T,
                            const MethodOptions& opt, std::uint64_t seed,
                            std::shared_ptr<DiagnosticsLog> diag = nullptr) {
  if (!(T >= 0.0)) throw Error("horizon T must be >= 0");
  auto net = std::make_shared<const ReactionNetwork>(network);
  auto f = std::make_shared<const Observable>(observable);
  switch (method) {
    case Method::apa: {
      opt.apa.check();
      const APAConfig cfg = [&] {
        APAConfig c = opt.apa;
        c.sim = opt.sim;
        return c;
      }();
      return [net, f, T, cfg, seed, diag](std::uint64_t i) {
        ApaDiagnostics d;
        const SampleScore s = run_apa_sample(*net, *f, T, cfg, RngStream(seed, i), &d);
        if (diag) diag->record(i, d);
        return Sample{s.value, d.base_jumps + d.aux_jump_count};
      };
    }
    case Method::apa_exact: {
      auto provider = analytic_provider(*net, *f);
      if (!provider)
        throw InapplicableError(
            "apa-exact needs a closed-form correction R, available only for "
            "single-species birth/death models (pure-birth, birth-death)");
      auto p = std::make_shared<const AnalyticProvider>(std::move(*provider));
      const SimOptions sim = opt.sim;
      return [net, f, T, p, seed, sim](std::uint64_t i) {
        RngStream rng(seed, i);
        const Trajectory base =
            simulate(*net, net->theta(), T, rng, Recording::all(), sim);
        return Sample{score_exact(*net, *f, T, base, *p).value, base.jump_count};
      };
    }
    case Method::girsanov: {
      girsanov_reaction(*net);  // throws if inapplicable
      const SimOptions sim = opt.sim;
      return [net, f, T, seed, sim](std::uint64_t i) {
        RngStream rng(seed, i);
        const GirsanovSample s = run_girsanov_sample(*net, *f, T, rng, sim);
        return Sample{s.score.value, s.jumps};
      };
    }
    case Method::cfd:
    case Method::crp:
    case Method::crn:
    case Method::independent: {
      FDConfig cfg;
      cfg.h = opt.h == 0.0 ? default_h(net->theta()) : opt.h;
      cfg.sim = opt.sim;
      cfg.coupling = method == Method::cfd   ? Coupling::cfd
                     : method == Method::crp ? Coupling::crp
                     : method == Method::crn ? Coupling::crn
                                             : Coupling::independent;
      if (!(cfg.h > 0.0)) throw Error("finite-difference step h must be > 0");
      return [net, f, T, cfg, seed](std::uint64_t i) {
        RngStream rng(seed, i);
        const FDSample s = run_fd_sample(*net, *f, T, cfg, rng);
        return Sample{s.value, s.jumps};
      };
    }
  }
  throw Error("unknown method");
}

}  // namespace stochsens
