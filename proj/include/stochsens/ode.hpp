#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "stochsens/error.hpp"

namespace stochsens {

using OdeRhs =
    std::function<void(double t, const std::vector<double>& y, std::vector<double>& dy)>;

/// Integrates y' = rhs(t, y) from t0 to t1 with the adaptive Dormand-Prince
/// 5(4) pair; the local error per step is kept below tol * (1 + |y|)
/// componentwise. Returns y(t1).
inline std::vector<double> integrate_dopri5(const OdeRhs& rhs,
                                            std::vector<double> y, double t0,
                                            double t1, double tol = 1e-10) {
  if (!(t1 >= t0)) throw Error("ODE integration needs t1 >= t0");
  if (t1 == t0) return y;
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                          c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // Error weights: 5th-order minus embedded 4th-order coefficients.
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                          e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  const std::size_t n = y.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n),
      ynew(n);
  double t = t0;
  double h = std::min(1e-3 * (t1 - t0), 1e-2);
  rhs(t, y, k1);
  std::size_t steps = 0;
  while (t < t1) {
    if (++steps > 10'000'000) throw Error("ODE integration did not finish");
    if (t + h > t1) h = t1 - t;
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
    rhs(t + c2 * h, tmp, k2);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    rhs(t + c3 * h, tmp, k3);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs(t + c4 * h, tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs(t + c5 * h, tmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                           a64 * k4[i] + a65 * k5[i]);
    rhs(t + h, tmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                            b6 * k6[i]);
    rhs(t + h, ynew, k7);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                            e6 * k6[i] + e7 * k7[i]);
      const double scale = tol * (1.0 + std::max(std::abs(y[i]), std::abs(ynew[i])));
      err = std::max(err, std::abs(e) / scale);
    }
    if (!std::isfinite(err)) throw Error("ODE integration diverged");
    if (err <= 1.0) {
      t = (t1 - t - h <= 1e-15 * std::max(1.0, std::abs(t1))) ? t1 : t + h;
      y.swap(ynew);
      k1.swap(k7);  // first-same-as-last
    }
    const double factor =
        err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    h *= factor;
  }
  return y;
}

}  // namespace stochsens
