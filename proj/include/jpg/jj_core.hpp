#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "jpg/constants.hpp"
#include "jpg/fit.hpp"
#include "jpg/ode.hpp"

namespace jpg {

// Physical description of the series JJ array. The array is modeled as one
// junction whose voltage is scaled by n_junctions (coherent pulse adder).
struct JunctionArrayParams {
  double critical_current;    // A
  double normal_resistance;   // ohm
  int n_junctions = 1;
  double beta_c = 0.01;       // Stewart-McCumber damping

  double characteristic_time() const {  // tau = Phi0 / (Ic Rn), seconds
    return kPhi0 / (critical_current * normal_resistance);
  }
  double characteristic_frequency() const { return 1.0 / characteristic_time(); }
  // Intrinsic shunt capacitance implied by beta_c = 2 pi f_c Rn C.
  double intrinsic_capacitance() const {
    return beta_c / (kTwoPi * characteristic_frequency() * normal_resistance);
  }
  void validate() const {
    if (critical_current <= 0.0) throw std::invalid_argument("Ic must be > 0");
    if (normal_resistance <= 0.0) throw std::invalid_argument("Rn must be > 0");
    if (n_junctions < 1) throw std::invalid_argument("n_junctions must be >= 1");
    if (beta_c < 0.0) throw std::invalid_argument("beta_c must be >= 0");
  }
};

// Dimensionless drive for the junction ODE. Times are in Theta units,
// Theta = 2 pi t / tau; the drive term is i_ac * sin(drive_ratio * Theta)
// so drive_ratio = f_d / f_c.
struct RsjDriveSpec {
  double i_dc = 0.0;          // I_b / I_c
  double i_ac = 0.0;
  double drive_ratio = 0.2;   // f_d / f_c
  double duration = 400.0;    // Theta units
  double output_step = 0.05;  // Theta units between output samples
  OdeTolerances tolerances{};

  void validate() const {
    if (drive_ratio <= 0.0) throw std::invalid_argument("drive_ratio must be > 0");
    if (duration <= 0.0) throw std::invalid_argument("duration must be > 0");
    if (!std::isfinite(i_dc)) throw std::invalid_argument("i_dc must be finite");
    if (output_step <= 0.0) throw std::invalid_argument("output_step must be > 0");
    if (tolerances.rtol <= 0.0 || tolerances.atol <= 0.0)
      throw std::invalid_argument("integrator tolerances must be positive");
  }
  double drive_period() const { return kTwoPi / drive_ratio; }
};

// Single-junction time series in dimensionless units. voltage_norm is
// d phi / d Theta, so V(t) = Ic Rn * voltage_norm per junction.
struct RsjTrace {
  std::vector<double> theta;
  std::vector<double> phase;
  std::vector<double> voltage_norm;
};

struct IvPoint {
  double bias_current;   // A
  double mean_voltage;   // V, full array
  bool failed = false;
};

struct IvCurve {
  std::vector<IvPoint> points;  // sorted ascending in current
  double drive_frequency = 0.0;  // Hz
};

struct PulseWindow {
  std::size_t begin;  // sample index, inclusive
  std::size_t end;    // exclusive
  std::size_t peak;
};

struct PulseFit {
  double center;         // s
  double sigma;          // s
  double amplitude;      // V
  double area;           // Wb, trapezoidal over the window
  double residual_norm;  // dimensionless (relative to amplitude)
};

// Integrates Eq.-of-motion
//   beta_c * phi'' = i_dc + i_ac sin(r Theta) - sin(phi) - phi'
// on a regular Theta grid. Requires beta_c > 0 (second-order form).
inline RsjTrace simulate_rsj(const JunctionArrayParams& params,
                             const RsjDriveSpec& drive) {
  params.validate();
  drive.validate();
  if (params.beta_c <= 0.0)
    throw std::invalid_argument("simulate_rsj requires beta_c > 0");

  const double inv_bc = 1.0 / params.beta_c;
  const double idc = drive.i_dc, iac = drive.i_ac, r = drive.drive_ratio;
  DormandPrince::Rhs rhs = [inv_bc, idc, iac, r](double th,
                                                 const std::vector<double>& y,
                                                 std::vector<double>& dydt) {
    dydt[0] = y[1];
    dydt[1] = inv_bc * (idc + iac * std::sin(r * th) - std::sin(y[0]) - y[1]);
  };

  const std::size_t n_out =
      static_cast<std::size_t>(std::ceil(drive.duration / drive.output_step)) + 1;
  std::vector<double> grid(n_out);
  for (std::size_t i = 0; i < n_out; ++i)
    grid[i] = static_cast<double>(i) * drive.output_step;
  grid.back() = std::min(grid.back(), drive.duration);

  RsjTrace trace;
  trace.theta.reserve(n_out);
  trace.phase.reserve(n_out);
  trace.voltage_norm.reserve(n_out);

  std::vector<double> y = {0.0, 0.0};
  DormandPrince stepper(drive.tolerances);
  stepper.integrate(rhs, y, grid,
                    [&trace](double th, const std::vector<double>& s) {
                      if (!std::isfinite(s[0]) || !std::isfinite(s[1]))
                        throw OdeFailure("NaN in RSJ state", th);
                      trace.theta.push_back(th);
                      trace.phase.push_back(s[0]);
                      trace.voltage_norm.push_back(s[1]);
                    });
  return trace;
}

// Per-Shapiro-step voltage of the full array.
inline double shapiro_voltage(int n_junctions, double drive_frequency_hz) {
  if (n_junctions <= 0 || drive_frequency_hz <= 0.0)
    throw std::invalid_argument("shapiro_voltage: inputs must be positive");
  return static_cast<double>(n_junctions) * kPhi0 * drive_frequency_hz;
}

// Mean of phi' over the trace tail (after discarding warmup_fraction).
inline double mean_voltage_norm(const RsjTrace& trace,
                                double warmup_fraction = 0.2) {
  const std::size_t n = trace.theta.size();
  const std::size_t start = static_cast<std::size_t>(warmup_fraction * n);
  if (start + 2 > n) throw std::invalid_argument("trace too short");
  // phase-difference estimate: robust against output-grid aliasing
  const double dphi = trace.phase.back() - trace.phase[start];
  const double dth = trace.theta.back() - trace.theta[start];
  return dphi / dth;
}

// I-V curve of the array under ac drive. Bias points are independent; each
// point simulates a fresh junction and averages the locked-state voltage.
inline IvCurve compute_iv_curve(const JunctionArrayParams& params,
                                double i_ac, double drive_frequency_hz,
                                const std::vector<double>& bias_grid_amps,
                                double n_periods = 200.0,
                                double warmup_fraction = 0.2) {
  params.validate();
  if (bias_grid_amps.empty())
    throw std::invalid_argument("compute_iv_curve: empty bias grid");
  const double fc = params.characteristic_frequency();
  const double scale = params.critical_current * params.normal_resistance *
                       static_cast<double>(params.n_junctions);

  IvCurve curve;
  curve.drive_frequency = drive_frequency_hz;
  curve.points.resize(bias_grid_amps.size());
  for (std::size_t i = 0; i < bias_grid_amps.size(); ++i) {
    RsjDriveSpec drive;
    drive.i_dc = bias_grid_amps[i] / params.critical_current;
    drive.i_ac = i_ac;
    drive.drive_ratio = drive_frequency_hz / fc;
    drive.duration = n_periods * drive.drive_period();
    drive.output_step = drive.drive_period() / 64.0;
    IvPoint& pt = curve.points[i];
    pt.bias_current = bias_grid_amps[i];
    try {
      const RsjTrace tr = simulate_rsj(params, drive);
      pt.mean_voltage = scale * mean_voltage_norm(tr, warmup_fraction);
    } catch (const OdeFailure&) {
      pt.mean_voltage = std::numeric_limits<double>::quiet_NaN();
      pt.failed = true;
    }
  }
  for (std::size_t i = 1; i < curve.points.size(); ++i)
    if (curve.points[i].bias_current < curve.points[i - 1].bias_current)
      throw std::invalid_argument("bias grid must be sorted ascending");
  return curve;
}

struct CurrentInterval {
  double low;   // A
  double high;  // A
  double width() const { return high - low; }
};

// Largest contiguous bias interval with |V - N Phi0 f_d| <= tolerance.
inline std::optional<CurrentInterval> find_locking_range(
    const IvCurve& iv, int n_junctions, double drive_frequency_hz,
    double voltage_tolerance) {
  if (voltage_tolerance <= 0.0)
    throw std::invalid_argument("find_locking_range: tolerance must be > 0");
  const double target = shapiro_voltage(n_junctions, drive_frequency_hz);
  std::optional<CurrentInterval> best;
  std::size_t i = 0;
  const auto& pts = iv.points;
  while (i < pts.size()) {
    if (pts[i].failed || std::abs(pts[i].mean_voltage - target) > voltage_tolerance) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < pts.size() && !pts[j + 1].failed &&
           std::abs(pts[j + 1].mean_voltage - target) <= voltage_tolerance)
      ++j;
    CurrentInterval cand{pts[i].bias_current, pts[j].bias_current};
    if (!best || cand.width() > best->width()) best = cand;
    i = j + 1;
  }
  return best;
}

// Disjoint windows around local maxima above threshold. Windows extend to
// the midpoints between neighboring peaks (series ends for the outermost
// pulses) so the integrated window area captures the full flux of one slip.
inline std::vector<PulseWindow> extract_pulses(
    const std::vector<double>& voltage, double threshold) {
  if (threshold <= 0.0)
    throw std::invalid_argument("extract_pulses: threshold must be > 0");
  std::vector<std::size_t> peaks;
  for (std::size_t i = 1; i + 1 < voltage.size(); ++i) {
    if (voltage[i] > threshold && voltage[i] >= voltage[i - 1] &&
        voltage[i] > voltage[i + 1]) {
      // merge plateau-adjacent detections
      if (!peaks.empty() && i - peaks.back() < 3 &&
          voltage[peaks.back()] >= voltage[i])
        continue;
      if (!peaks.empty() && i - peaks.back() < 3) peaks.back() = i;
      else peaks.push_back(i);
    }
  }
  std::vector<PulseWindow> windows;
  for (std::size_t p = 0; p < peaks.size(); ++p) {
    const std::size_t begin =
        p > 0 ? (peaks[p - 1] + peaks[p]) / 2 + 1 : static_cast<std::size_t>(0);
    const std::size_t end =
        p + 1 < peaks.size() ? (peaks[p] + peaks[p + 1]) / 2 + 1 : voltage.size();
    windows.push_back({begin, end, peaks[p]});
  }
  return windows;
}

// Least-squares Gaussian fit of one pulse window. `times` are in seconds and
// `volts` in SI volts. The fit uses only the contiguous core above 10% of the
// peak so the slowly varying inter-pulse baseline cannot bias the width; the
// trapezoidal flux estimate integrates the whole window.
inline PulseFit fit_gaussian_pulse(const std::vector<double>& times,
                                   const std::vector<double>& volts) {
  if (times.size() < 8 || times.size() != volts.size())
    throw std::invalid_argument("fit_gaussian_pulse: need >= 8 samples");
  std::size_t ipk = 0;
  for (std::size_t i = 1; i < volts.size(); ++i)
    if (volts[i] > volts[ipk]) ipk = i;

  const double core_level = 0.1 * volts[ipk];
  std::size_t lo = ipk, hi = ipk;
  while (lo > 0 && volts[lo - 1] > core_level && volts[lo - 1] < volts[lo]) --lo;
  while (hi + 1 < volts.size() && volts[hi + 1] > core_level &&
         volts[hi + 1] < volts[hi])
    ++hi;
  if (hi - lo + 1 < 8)
    throw std::invalid_argument("fit_gaussian_pulse: pulse core under-resolved");
  const std::vector<double> core_t(times.begin() + static_cast<long>(lo),
                                   times.begin() + static_cast<long>(hi) + 1);
  const std::vector<double> core_v(volts.begin() + static_cast<long>(lo),
                                   volts.begin() + static_cast<long>(hi) + 1);
  std::vector<double> p0 = {volts[ipk], times[ipk],
                            0.25 * (core_t.back() - core_t.front())};

  auto gauss = [](const std::vector<double>& p, double t) {
    const double z = (t - p[1]) / p[2];
    return p[0] * std::exp(-0.5 * z * z);
  };
  CurveFit fit = fit_least_squares(gauss, core_t, core_v, p0);
  if (!fit.converged)
    throw std::runtime_error("fit_gaussian_pulse: non-convergence, |r| = " +
                             std::to_string(fit.residual_norm));
  double area = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i)
    area += 0.5 * (volts[i] + volts[i - 1]) * (times[i] - times[i - 1]);

  PulseFit out;
  out.amplitude = fit.params[0];
  out.center = fit.params[1];
  out.sigma = std::abs(fit.params[2]);
  out.area = area;
  out.residual_norm = fit.residual_norm / std::max(std::abs(out.amplitude), 1e-300);
  if (out.sigma <= 0.0)
    throw std::runtime_error("fit_gaussian_pulse: non-positive sigma");
  return out;
}

}  // namespace jpg
