#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace jpg {

struct OdeTolerances {
  double rtol = 1e-9;
  double atol = 1e-12;
  double initial_step = 1e-3;
  double min_step = 1e-14;
};

struct OdeFailure : std::runtime_error {
  double t_last;
  OdeFailure(const std::string& what, double t)
      : std::runtime_error(what + " (t = " + std::to_string(t) + ")"),
        t_last(t) {}
};

// Dormand-Prince 5(4) with step-size control. The integrator lands exactly on
// each requested output time so callers get a regular grid without dense
// output interpolation.
class DormandPrince {
 public:
  using State = std::vector<double>;
  using Rhs = std::function<void(double, const State&, State&)>;

  explicit DormandPrince(OdeTolerances tol = {}) : tol_(tol) {}

  // Integrates from grid.front() to grid.back(); invokes observer(t, y) at
  // every grid time (including the first). `y` is advanced in place.
  void integrate(const Rhs& rhs, State& y, const std::vector<double>& grid,
                 const std::function<void(double, const State&)>& observer) {
    if (grid.size() < 2) {
      if (!grid.empty()) observer(grid.front(), y);
      return;
    }
    const std::size_t n = y.size();
    State k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    State ytmp(n), y5(n), yerr(n);

    double t = grid.front();
    observer(t, y);
    double h = tol_.initial_step;
    bool fresh_k1 = true;

    for (std::size_t gi = 1; gi < grid.size(); ++gi) {
      const double t_end = grid[gi];
      while (t < t_end) {
        h = std::min(h, t_end - t);
        if (fresh_k1) rhs(t, y, k1);
        fresh_k1 = false;

        for (std::size_t i = 0; i < n; ++i)
          ytmp[i] = y[i] + h * (a21 * k1[i]);
        rhs(t + c2 * h, ytmp, k2);
        for (std::size_t i = 0; i < n; ++i)
          ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        rhs(t + c3 * h, ytmp, k3);
        for (std::size_t i = 0; i < n; ++i)
          ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs(t + c4 * h, ytmp, k4);
        for (std::size_t i = 0; i < n; ++i)
          ytmp[i] =
              y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs(t + c5 * h, ytmp, k5);
        for (std::size_t i = 0; i < n; ++i)
          ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                                a64 * k4[i] + a65 * k5[i]);
        rhs(t + h, ytmp, k6);
        for (std::size_t i = 0; i < n; ++i)
          y5[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] +
                              b5 * k5[i] + b6 * k6[i]);
        rhs(t + h, y5, k7);

        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          yerr[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                         e6 * k6[i] + e7 * k7[i]);
          const double sc =
              tol_.atol + tol_.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
          const double r = yerr[i] / sc;
          err += r * r;
        }
        err = std::sqrt(err / static_cast<double>(n));
        if (!std::isfinite(err)) throw OdeFailure("NaN in ODE state", t);

        if (err <= 1.0) {
          t += h;
          y.swap(y5);
          k1.swap(k7);  // FSAL
          fresh_k1 = false;
          double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
          h *= std::clamp(fac, 0.2, 5.0);
        } else {
          double fac = 0.9 * std::pow(err, -0.2);
          h *= std::clamp(fac, 0.1, 1.0);
          // k1 is still valid at (t, y) after a rejected step
          if (h < tol_.min_step)
            throw OdeFailure("ODE step size underflow", t);
        }
      }
      observer(t_end, y);
      fresh_k1 = true;  // stepping to t_end invalidates FSAL reuse
    }
  }

 private:
  OdeTolerances tol_;

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
  static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600;
  static constexpr double e3 = 500.0 / 1113 - 7571.0 / 16695;
  static constexpr double e4 = 125.0 / 192 - 393.0 / 640;
  static constexpr double e5 = -2187.0 / 6784 + 92097.0 / 339200;
  static constexpr double e6 = 11.0 / 84 - 187.0 / 2100;
  static constexpr double e7 = -1.0 / 40;
};

}  // namespace jpg
