#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "stochsens/error.hpp"

// Sample accumulation, normal-approximation confidence intervals and the
// adaptive stopping rule "stop once the 95% CI half-length is below
// rel_target * |estimate|".

namespace stochsens {

inline constexpr double kZ95 = 1.96;

/// Running mean and sum of squared deviations (Welford), mergeable
/// (Chan et al.), plus the accumulated simulation cost.
struct Accumulator {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double cost = 0.0;

  void add(double x, double sample_cost = 0.0) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
    cost += sample_cost;
  }

  void merge(const Accumulator& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
    const double total = na + nb;
    const double delta = o.mean - mean;
    mean += delta * nb / total;
    m2 += o.m2 + delta * delta * na * nb / total;
    n += o.n;
    cost += o.cost;
  }

  double variance() const {
    return n >= 2 ? m2 / static_cast<double>(n - 1) : 0.0;
  }
  double ci_half() const {
    return n >= 1 ? kZ95 * std::sqrt(variance() / static_cast<double>(n)) : 0.0;
  }
  double mean_cost() const {
    return n >= 1 ? cost / static_cast<double>(n) : 0.0;
  }
};

struct EstimateReport {
  std::string method;
  double theta = 0.0;
  double T = 0.0;
  double estimate = 0.0;
  double ci_half = 0.0;
  std::uint64_t n = 0;
  double variance = 0.0;
  double seconds = 0.0;
  bool converged = true;
  std::string flag;        // empty, or why the rule did not converge
  double mean_cost = 0.0;  // simulated jumps per sample

  double cost_proxy() const { return static_cast<double>(n) * mean_cost; }
  bool covers(double value, double widen = 1.0) const {
    return std::abs(estimate - value) <= widen * ci_half;
  }
};

/// One score and its cost (simulated jumps).
struct Sample {
  double value = 0.0;
  std::uint64_t cost = 0;
};

/// Sample i must be a deterministic function of i (typically through the
/// random stream (seed, i)), so results do not depend on the worker count.
using Sampler = std::function<Sample(std::uint64_t index)>;

struct StoppingRule {
  double rel_target = 0.05;
  std::uint64_t n_min = 100;
  std::uint64_t n_max = 10'000'000;
  std::uint64_t batch = 100;

  void check() const {
    if (!(rel_target > 0.0)) throw Error("relative CI target must be > 0");
    if (n_min < 100) throw Error("n_min must be >= 100");
    if (batch < 1) throw Error("batch size must be >= 1");
    if (n_max < n_min) throw Error("n_max must be >= n_min");
  }

  bool satisfied(const Accumulator& acc) const {
    return acc.n >= n_min && acc.ci_half() <= rel_target * std::abs(acc.mean);
  }
};

namespace detail {

// Runs batches [first, first + count) on up to `workers` threads; batch b
// covers sample indices [b * size, (b + 1) * size).
inline std::vector<Accumulator> run_batches(const Sampler& sampler,
                                            std::uint64_t first,
                                            std::uint64_t count,
                                            std::uint64_t size,
                                            unsigned workers) {
  std::vector<Accumulator> out(count);
  auto run_one = [&](std::uint64_t b) {
    Accumulator acc;
    const std::uint64_t begin = (first + b) * size;
    for (std::uint64_t i = begin; i < begin + size; ++i) {
      const Sample s = sampler(i);
      acc.add(s.value, static_cast<double>(s.cost));
    }
    out[b] = acc;
  };
  const unsigned w = static_cast<unsigned>(
      std::min<std::uint64_t>(std::max(workers, 1u), count));
  if (w <= 1) {
    for (std::uint64_t b = 0; b < count; ++b) run_one(b);
    return out;
  }
  std::atomic<std::uint64_t> next{0};
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < w; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::uint64_t b; (b = next.fetch_add(1)) < count;) run_one(b);
      } catch (...) {
        errors[t] = std::current_exception();
        next = count;
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline EstimateReport make_report(const Accumulator& acc, double seconds) {
  EstimateReport r;
  r.estimate = acc.mean;
  r.ci_half = acc.ci_half();
  r.n = acc.n;
  r.variance = acc.variance();
  r.seconds = seconds;
  r.mean_cost = acc.mean_cost();
  return r;
}

}  // namespace detail

/// Draws batches until the stopping rule holds or n_max samples are used.
/// The rule is checked after every batch in index order, so the result is
/// identical to a sequential run for any worker count; workers only compute
/// batches ahead (rounds grow with the number of batches already done, so
/// the wasted work past the stopping point stays a small fraction).
inline EstimateReport run_until_target(const Sampler& sampler,
                                       const StoppingRule& rule,
                                       unsigned workers = 1) {
  rule.check();
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t max_batches = (rule.n_max + rule.batch - 1) / rule.batch;
  Accumulator total;
  std::uint64_t done = 0;
  bool converged = false;
  while (!converged && done < max_batches) {
    const std::uint64_t round = std::min<std::uint64_t>(
        std::max<std::uint64_t>({1, done / 4, workers}), max_batches - done);
    const auto batches =
        detail::run_batches(sampler, done, round, rule.batch, workers);
    for (const Accumulator& b : batches) {
      total.merge(b);
      ++done;
      if (rule.satisfied(total)) {
        converged = true;
        break;
      }
    }
  }
  const double seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  EstimateReport r = detail::make_report(total, seconds);
  r.converged = converged;
  if (!converged) {
    r.flag = std::abs(r.estimate) <= r.ci_half && r.variance > 0.0
                 ? "relative target ill-defined (CI contains 0)"
                 : "n_max reached";
  }
  return r;
}

/// Exactly n samples, no stopping rule.
inline EstimateReport run_fixed(const Sampler& sampler, std::uint64_t n,
                                unsigned workers = 1,
                                std::uint64_t batch = 1000) {
  const auto start = std::chrono::steady_clock::now();
  Accumulator total;
  const std::uint64_t full = n / batch;
  for (const Accumulator& b : detail::run_batches(sampler, 0, full, batch, workers))
    total.merge(b);
  for (std::uint64_t i = full * batch; i < n; ++i) {
    const Sample s = sampler(i);
    total.add(s.value, static_cast<double>(s.cost));
  }
  const double seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  return detail::make_report(total, seconds);
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json report_json(const EstimateReport& r) {
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["theta"] = r.theta;
  j["T"] = r.T;
  j["estimate"] = r.estimate;
  j["ci_half"] = r.ci_half;
  j["n"] = r.n;
  j["variance"] = r.variance;
  j["seconds"] = r.seconds;
  j["converged"] = r.converged;
  j["flag"] = r.flag;
  j["mean_cost"] = r.mean_cost;
  return j;
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline const char* report_csv_header() {
  return "method,theta,T,estimate,ci_half,n,variance,seconds,converged,mean_cost";
}

inline std::string report_csv_row(const EstimateReport& r) {
  return r.method + "," + format_number(r.theta) + "," + format_number(r.T) +
         "," + format_number(r.estimate) + "," + format_number(r.ci_half) + "," +
         std::to_string(r.n) + "," + format_number(r.variance) + "," +
         format_number(r.seconds) + "," + (r.converged ? "1" : "0") + "," +
         format_number(r.mean_cost);
}

}  // namespace stochsens
