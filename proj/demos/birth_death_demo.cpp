// Sensitivity of the mean population of a birth-death process with respect
// to the per-molecule death rate, by every estimator in the library, next to
// the closed-form value.

#include <cstdio>

#include "stochsens/stochsens.hpp"

int main() {
  using namespace stochsens;
  const double theta = 0.01, T = 5.0;
  const ModelSpec spec = models::birth_death(theta, T);
  const double exact = *closed_form_sensitivity(spec.network, spec.observable, T);
  std::printf("birth-death, theta=%g, T=%g: exact sensitivity %.4f\n\n", theta, T,
              exact);
  std::printf("%-10s %12s %10s %10s %14s\n", "method", "estimate", "ci_half",
              "n", "jumps/sample");
  for (Method m : {Method::apa, Method::apa_exact, Method::girsanov,
                   Method::cfd, Method::crp, Method::crn}) {
    MethodOptions opt;
    opt.h = 0.01;
    const Sampler sampler =
        make_sampler(m, spec.network, spec.observable, T, opt, /*seed=*/2024);
    const EstimateReport r = run_until_target(sampler, StoppingRule{});
    std::printf("%-10s %12.4f %10.4f %10llu %14.1f\n", to_string(m), r.estimate,
                r.ci_half, static_cast<unsigned long long>(r.n), r.mean_cost);
  }
  return 0;
}
