#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "jpg/constants.hpp"
#include "jpg/ode.hpp"
#include "jpg/waveform.hpp"

namespace jpg {

using Complex = std::complex<double>;

// Two- or three-level dissipative qubit. T2 is derived:
// 1/T2 = 1/(2 T1) + 1/Tphi.
struct QubitModel {
  double omega_10;              // rad/s
  double T1;                    // s (infinity() disables relaxation)
  double Tphi;                  // s (infinity() disables pure dephasing)
  int levels = 2;
  double anharmonicity = 0.05;  // fractional, used when levels == 3

  double T2() const { return 1.0 / (0.5 / T1 + 1.0 / Tphi); }
  double qubit_period() const { return kTwoPi / omega_10; }
  void validate() const {
    if (omega_10 <= 0.0) throw std::invalid_argument("omega_10 must be > 0");
    if (T1 <= 0.0 || Tphi <= 0.0)
      throw std::invalid_argument("T1 and Tphi must be > 0");
    if (levels != 2 && levels != 3)
      throw std::invalid_argument("levels must be 2 or 3");
    if (levels == 3 && (anharmonicity <= 0.0 || anharmonicity >= 1.0))
      throw std::invalid_argument("anharmonicity must be in (0, 1)");
  }
  static QubitModel lossless(double omega_10, int levels = 2,
                             double alpha = 0.05) {
    return {omega_10, std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity(), levels, alpha};
  }
};

enum class CouplingMode { Physical, Normalized };

// Either the physical tip-angle parameters or a normalized target nu_pi.
struct CouplingParams {
  CouplingMode mode = CouplingMode::Normalized;
  // physical
  double attenuation = 0.0;           // dimensionless A
  double coupling_capacitance = 0.0;  // F
  double qubit_capacitance = 0.0;     // F
  int n_junctions = 0;
  // normalized
  int target_nu_pi = 0;
};

// Discrete rotation per pulse. Physical mode:
//   delta_theta = N_JJ A C_c Phi0 sqrt(2 omega_10 / (hbar C_T)).
inline double tip_angle(const CouplingParams& c, const QubitModel& q) {
  if (c.mode == CouplingMode::Normalized) {
    if (c.target_nu_pi < 1)
      throw std::invalid_argument("tip_angle: target_nu_pi must be >= 1");
    return kPi / static_cast<double>(c.target_nu_pi);
  }
  if (c.attenuation <= 0.0 || c.coupling_capacitance <= 0.0 ||
      c.qubit_capacitance <= 0.0 || c.n_junctions < 1)
    throw std::invalid_argument("tip_angle: missing physical coupling fields");
  return static_cast<double>(c.n_junctions) * c.attenuation *
         c.coupling_capacitance * kPhi0 *
         std::sqrt(2.0 * q.omega_10 / (kHbar * c.qubit_capacitance));
}

// Hermitian d x d density matrix, row-major.
struct DensityState {
  int dim = 2;
  std::vector<Complex> m;

  static DensityState ground(int dim = 2) {
    DensityState s;
    s.dim = dim;
    s.m.assign(static_cast<std::size_t>(dim) * dim, Complex(0.0));
    s.m[0] = 1.0;
    return s;
  }
  static DensityState excited(int dim = 2) {
    DensityState s = ground(dim);
    s.m[0] = 0.0;
    s.at(1, 1) = 1.0;
    return s;
  }
  Complex& at(int i, int j) { return m[static_cast<std::size_t>(i) * dim + j]; }
  const Complex& at(int i, int j) const {
    return m[static_cast<std::size_t>(i) * dim + j];
  }
  double trace() const {
    double t = 0.0;
    for (int i = 0; i < dim; ++i) t += at(i, i).real();
    return t;
  }
  double purity() const {
    double p = 0.0;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        p += (at(i, j) * at(j, i)).real();
    return p;
  }
  double min_eigenvalue() const;
  bool is_hermitian(double tol = 1e-12) const {
    for (int i = 0; i < dim; ++i)
      for (int j = i; j < dim; ++j)
        if (std::abs(at(i, j) - std::conj(at(j, i))) > tol) return false;
    return true;
  }
};

inline double DensityState::min_eigenvalue() const {
  if (dim == 2) {
    const double a = at(0, 0).real(), d = at(1, 1).real();
    const double od = std::abs(at(0, 1));
    const double mid = 0.5 * (a + d);
    const double rad = std::sqrt(0.25 * (a - d) * (a - d) + od * od);
    return mid - rad;
  }
  // Hermitian 3x3: trigonometric closed form.
  const double q = trace() / 3.0;
  DensityState b = *this;
  for (int i = 0; i < dim; ++i) b.at(i, i) -= q;
  double p2 = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) p2 += std::norm(b.at(i, j));
  const double p = std::sqrt(p2 / 6.0);
  if (p < 1e-300) return q;
  // det(B / p)
  auto e = [&](int i, int j) { return b.at(i, j) / p; };
  const Complex det = e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) -
                      e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0)) +
                      e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0));
  const double r = std::clamp(det.real() / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  return q + 2.0 * p * std::cos(phi + 2.0 * kPi / 3.0);
}

inline double excited_population(const DensityState& s) {
  return std::clamp(s.at(1, 1).real(), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// SU(2) rotations (used for kicks and for exact sequence bookkeeping).

// U = [[a, -conj(b)], [b, conj(a)]], |a|^2 + |b|^2 = 1.
struct Su2 {
  Complex a{1.0, 0.0};
  Complex b{0.0, 0.0};

  static Su2 identity() { return {}; }
  // Rotation by `angle` about the equatorial axis at azimuth phi:
  // n = (cos phi, sin phi, 0).
  static Su2 equatorial(double angle, double azimuth) {
    const double c = std::cos(0.5 * angle), s = std::sin(0.5 * angle);
    // exp(-i angle/2 (cos sx + sin sy))
    return {Complex(c, 0.0),
            Complex(s * std::sin(azimuth), -s * std::cos(azimuth))};
  }
  static Su2 about_z(double angle) {
    return {Complex(std::cos(0.5 * angle), -std::sin(0.5 * angle)),
            Complex(0.0, 0.0)};
  }
  Su2 operator*(const Su2& o) const {  // this applied after o
    return {a * o.a - std::conj(b) * o.b, b * o.a + std::conj(a) * o.b};
  }
  Su2 dagger() const { return {std::conj(a), Complex(-b.real(), -b.imag())}; }
  // Bloch vector of U|0>.
  void bloch_from_ground(double& x, double& y, double& z) const {
    x = 2.0 * (std::conj(a) * b).real();
    y = 2.0 * (std::conj(a) * b).imag();
    z = std::norm(a) - std::norm(b);
  }
};

inline void apply_unitary_2x2(DensityState& s, const Su2& u) {
  const Complex u00 = u.a, u01 = -std::conj(u.b), u10 = u.b, u11 = std::conj(u.a);
  const Complex r00 = s.at(0, 0), r01 = s.at(0, 1), r10 = s.at(1, 0),
                r11 = s.at(1, 1);
  const Complex t00 = u00 * r00 + u01 * r10, t01 = u00 * r01 + u01 * r11;
  const Complex t10 = u10 * r00 + u11 * r10, t11 = u10 * r01 + u11 * r11;
  s.at(0, 0) = t00 * std::conj(u00) + t01 * std::conj(u01);
  s.at(0, 1) = t00 * std::conj(u10) + t01 * std::conj(u11);
  s.at(1, 0) = t10 * std::conj(u00) + t11 * std::conj(u01);
  s.at(1, 1) = t10 * std::conj(u10) + t11 * std::conj(u11);
}

// ---------------------------------------------------------------------------
// Exact free-evolution map: phase precession plus amplitude damping and pure
// dephasing on the {|0>, |1>} subspace. For 3 levels the |2> population is
// held (leakage-oracle use) and its coherences get unitary phases only.
inline void free_evolution(DensityState& s, const QubitModel& q, double dt,
                           double detuning = 0.0) {
  const double omega = q.omega_10 + detuning;
  const double g1 = std::isinf(q.T1) ? 1.0 : std::exp(-dt / q.T1);
  const double g2 = (std::isinf(q.T1) && std::isinf(q.Tphi))
                        ? 1.0
                        : std::exp(-dt / q.T2());
  const Complex ph01 = std::polar(g2, omega * dt);  // rho01 ~ e^{+i w t}
  const double p1 = s.at(1, 1).real() * g1;
  s.at(0, 0) += Complex(s.at(1, 1).real() - p1, 0.0);
  s.at(1, 1) = Complex(p1, s.at(1, 1).imag());
  s.at(0, 1) *= ph01;
  s.at(1, 0) = std::conj(s.at(0, 1));
  if (s.dim == 3) {
    const double w21 = omega * (1.0 - q.anharmonicity);
    const Complex ph12 = std::polar(g2, w21 * dt);
    const Complex ph02 = std::polar(g2, (omega + w21) * dt);
    s.at(1, 2) *= ph12;
    s.at(2, 1) = std::conj(s.at(1, 2));
    s.at(0, 2) *= ph02;
    s.at(2, 0) = std::conj(s.at(0, 2));
  }
}

// Instantaneous kick by delta_theta about an equatorial axis. For 3 levels
// the drive couples 1 <-> 2 with a sqrt(2) matrix element.
inline void apply_kick(DensityState& s, double delta_theta, double azimuth = 0.0) {
  if (s.dim == 2) {
    apply_unitary_2x2(s, Su2::equatorial(delta_theta, azimuth));
    return;
  }
  // 3x3: U = exp(-i (delta_theta / 2) L), L = e^{i phi}(|0><1| + sqrt2 |1><2|) + h.c.
  const Complex  ephi = std::polar(1.0, azimuth);
  const double half = 0.5 * delta_theta;
  const std::size_t d = 3;
  std::vector<Complex> l(d * d, Complex(0.0));
  l[0 * 3 + 1] = std::conj(ephi);
  l[1 * 3 + 0] = ephi;
  l[1 * 3 + 2] = std::conj(ephi) * std::sqrt(2.0);
  l[2 * 3 + 1] = ephi * std::sqrt(2.0);
  // exp(-i half L) by scaling-and-squaring-free Taylor series; ||half L|| is
  // small for physical tip angles so the series converges in a few terms.
  std::vector<Complex> u(d * d, Complex(0.0)), term(d * d, Complex(0.0)),
      next(d * d);
  for (std::size_t i = 0; i < d; ++i) u[i * d + i] = term[i * d + i] = 1.0;
  const Complex factor(0.0, -half);
  for (int n = 1; n <= 40; ++n) {
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        Complex acc(0.0);
        for (std::size_t k = 0; k < d; ++k)
          acc += term[i * d + k] * l[k * d + j];
        next[i * d + j] = acc * factor / static_cast<double>(n);
      }
    term = next;
    double mx = 0.0;
    for (auto& c : term) {
      mx = std::max(mx, std::abs(c));
    }
    for (std::size_t i = 0; i < d * d; ++i) u[i] += term[i];
    if (mx < 1e-18) break;
  }
  // rho <- U rho U^dagger
  std::vector<Complex> tmp(d * d), out(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      Complex acc(0.0);
      for (std::size_t k = 0; k < d; ++k) acc += u[i * d + k] * s.m[k * d + j];
      tmp[i * d + j] = acc;
    }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      Complex acc(0.0);
      for (std::size_t k = 0; k < d; ++k)
        acc += tmp[i * d + k] * std::conj(u[j * d + k]);
      out[i * d + j] = acc;
    }
  s.m = std::move(out);
}

struct TrajectoryPoint {
  double time;  // s
  double p1;
  double purity;
  DensityState state;
};

// Discrete-kick evolution: n_pulses kicks spaced k qubit periods apart, with
// exact free precession and decay between kicks. The trajectory is sampled
// at the center of the idle qubit period following each pulse. `azimuths`
// gives the kick axis per pulse (empty -> all X).
inline std::vector<TrajectoryPoint> evolve_discrete(
    const QubitModel& qubit, double delta_theta, int k, int n_pulses,
    const std::vector<double>& azimuths = {}, double detuning = 0.0,
    DensityState initial = DensityState::ground(2)) {
  qubit.validate();
  if (k < 1) throw std::invalid_argument("evolve_discrete: k must be >= 1");
  if (!azimuths.empty() && azimuths.size() < static_cast<std::size_t>(n_pulses))
    throw std::invalid_argument("evolve_discrete: azimuth schedule too short");
  const double tq = qubit.qubit_period();
  const double sample_offset = (static_cast<double>(k) - 0.5) * tq;
  DensityState s = std::move(initial);
  std::vector<TrajectoryPoint> traj;
  traj.reserve(static_cast<std::size_t>(n_pulses));
  for (int j = 0; j < n_pulses; ++j) {
    apply_kick(s, delta_theta, azimuths.empty() ? 0.0 : azimuths[j]);
    DensityState probe = s;
    free_evolution(probe, qubit, sample_offset, detuning);
    const double t = static_cast<double>(j) * k * tq + sample_offset;
    traj.push_back({t, excited_population(probe), probe.purity(), probe});
    free_evolution(s, qubit, static_cast<double>(k) * tq, detuning);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Continuous pulse-train evolution (lab frame, no rotating-wave
// approximation): H = H0 - Omega_d s_d(t) Sx with Lindblad relaxation and
// pure dephasing. s_d(t) is the sum of unit-area Gaussians from the train,
// scaled by each event's area, so the delta-limit tip angle per unit-area
// pulse is 2 Omega_d.
struct ContinuousRunConfig {
  double omega_d = 0.0;     // rad/s; 0 -> no drive beyond the train
  OdeTolerances tolerances{1e-10, 1e-13, 1e-13, 1e-22};
  double window_half_width_sigmas = 8.0;
  int min_points_per_period = 40;
  int min_points_per_sigma = 12;
};

namespace detail {

struct LindbladSystem {
  const QubitModel* qubit;
  const PulseTrain* train;
  double omega_d;

  // drive amplitude at time t (sum of unit-area Gaussians, scaled by area)
  double drive(double t) const {
    double s = 0.0;
    for (const auto& ev : train->events) {
      const double dt = t - ev.time;
      const double w = 10.0 * ev.sigma;
      if (dt < -w || dt > w) continue;
      const double z = dt / ev.sigma;
      s += ev.area * std::exp(-0.5 * z * z) /
           (ev.sigma * 2.5066282746310002);
    }
    return s;
  }

  // dp/dt = -i[H, p] + g1 (a p a+ - 1/2{a+a, p}) + dephasing, with the
  // ladder lowering operator a and number-operator dephasing chosen so the
  // two-level rates reproduce 1/T2 = 1/(2 T1) + 1/Tphi.
  void rhs(double t, const std::vector<double>& y,
           std::vector<double>& dydt) const {
    const int d = qubit->levels;
    const auto at = [&](int i, int j) {
      const std::size_t base = 2 * (static_cast<std::size_t>(i) * d + j);
      return Complex(y[base], y[base + 1]);
    };
    const double g1 = std::isinf(qubit->T1) ? 0.0 : 1.0 / qubit->T1;
    const double gphi = std::isinf(qubit->Tphi) ? 0.0 : 1.0 / qubit->Tphi;
    const double om = omega_d * drive(t);

    std::vector<Complex> h(static_cast<std::size_t>(d) * d, Complex(0.0));
    h[0 * d + 0] = 0.0;
    h[1 * d + 1] = qubit->omega_10;
    if (d == 3) h[2 * d + 2] = qubit->omega_10 * (2.0 - qubit->anharmonicity);
    h[0 * d + 1] = h[1 * d + 0] = -om;
    if (d == 3) h[1 * d + 2] = h[2 * d + 1] = -om * std::sqrt(2.0);

    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        Complex comm(0.0);
        for (int k = 0; k < d; ++k)
          comm += h[static_cast<std::size_t>(i) * d + k] * at(k, j) -
                  at(i, k) * h[static_cast<std::size_t>(k) * d + j];
        Complex dr = Complex(0.0, -1.0) * comm;
        if (g1 > 0.0) {
          if (i + 1 < d && j + 1 < d)
            dr += g1 * std::sqrt(static_cast<double>((i + 1) * (j + 1))) *
                  at(i + 1, j + 1);
          dr -= 0.5 * g1 * static_cast<double>(i + j) * at(i, j);
        }
        if (gphi > 0.0) {
          const double dz = static_cast<double>(i - j);
          dr -= gphi * dz * dz * at(i, j);
        }
        const std::size_t base = 2 * (static_cast<std::size_t>(i) * d + j);
        dydt[base] = dr.real();
        dydt[base + 1] = dr.imag();
      }
  }
};

}  // namespace detail

// Integrates the train between output times. Gaps with no pulse support use
// the exact free-evolution map; windows around pulses are integrated.
inline std::vector<TrajectoryPoint> evolve_continuous(
    const QubitModel& qubit, const PulseTrain& train, double omega_drive,
    DensityState initial, const std::vector<double>& output_times,
    const ContinuousRunConfig& cfg = {}) {
  qubit.validate();
  if (output_times.empty())
    throw std::invalid_argument("evolve_continuous: empty output grid");
  if (initial.dim != qubit.levels)
    throw std::invalid_argument("evolve_continuous: state dim mismatch");

  // Build merged integration windows around pulses.
  struct Window {
    double lo, hi;
  };
  std::vector<Window> windows;
  for (const auto& ev : train.events) {
    const double w = cfg.window_half_width_sigmas * ev.sigma;
    if (!windows.empty() && ev.time - w <= windows.back().hi)
      windows.back().hi = ev.time + w;
    else
      windows.push_back({ev.time - w, ev.time + w});
  }

  detail::LindbladSystem sys{&qubit, &train, omega_drive};
  const double tq = qubit.qubit_period();
  double max_step = tq / cfg.min_points_per_period;
  for (const auto& ev : train.events)
    max_step = std::min(max_step, ev.sigma / cfg.min_points_per_sigma);

  const int d = qubit.levels;
  std::vector<double> y(2 * static_cast<std::size_t>(d) * d);
  auto pack = [&](const DensityState& s) {
    for (std::size_t i = 0; i < s.m.size(); ++i) {
      y[2 * i] = s.m[i].real();
      y[2 * i + 1] = s.m[i].imag();
    }
  };
  auto unpack = [&](DensityState& s) {
    for (std::size_t i = 0; i < s.m.size(); ++i)
      s.m[i] = Complex(y[2 * i], y[2 * i + 1]);
  };
  pack(initial);
  DensityState s = std::move(initial);

  double t = std::min(output_times.front(),
                      windows.empty() ? output_times.front() : windows.front().lo);
  OdeTolerances tol = cfg.tolerances;
  tol.initial_step = max_step * 0.25;

  auto integrate_span = [&](double from, double to) {
    if (to <= from) return;
    const int n = std::max(2, static_cast<int>(std::ceil((to - from) / max_step)) + 1);
    std::vector<double> grid(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      grid[static_cast<std::size_t>(i)] =
          from + (to - from) * static_cast<double>(i) / (n - 1);
    DormandPrince stepper(tol);
    stepper.integrate([&sys](double tt, const std::vector<double>& yy,
                             std::vector<double>& dd) { sys.rhs(tt, yy, dd); },
                      y, grid, [](double, const std::vector<double>&) {});
  };

  // Advances state from t to target, using exact maps in drive-free gaps.
  auto advance_to = [&](double target) {
    while (t < target - 1e-30) {
      // find window containing or after t
      const Window* cur = nullptr;
      const Window* next = nullptr;
      for (const auto& w : windows) {
        if (t >= w.lo - 1e-30 && t < w.hi) {
          cur = &w;
          break;
        }
        if (w.lo >= t) {
          next = &w;
          break;
        }
      }
      if (cur) {
        const double to = std::min(target, cur->hi);
        integrate_span(t, to);
        t = to;
      } else {
        const double gap_end = next ? std::min(target, next->lo) : target;
        unpack(s);
        free_evolution(s, qubit, gap_end - t);
        pack(s);
        t = gap_end;
      }
    }
  };

  std::vector<TrajectoryPoint> traj;
  traj.reserve(output_times.size());
  for (double to : output_times) {
    if (to < t - 1e-30)
      throw std::invalid_argument("evolve_continuous: output grid not sorted");
    advance_to(to);
    unpack(s);
    traj.push_back({to, excited_population(s), s.purity(), s});
  }
  return traj;
}

// Idle-center sample times following each pulse of a k-subharmonic train.
inline std::vector<double> idle_center_times(const PulseTrain& train,
                                             const QubitModel& qubit, int k) {
  std::vector<double> ts;
  ts.reserve(train.events.size());
  const double tq = qubit.qubit_period();
  for (const auto& ev : train.events)
    ts.push_back(ev.time + (static_cast<double>(k) - 0.5) * tq);
  return ts;
}

struct XpiResult {
  double fidelity;
  int nu_pi_effective;
};

// Max P1 over idle-center samples and the pulse count achieving it.
inline XpiResult xpi_fidelity(const std::vector<TrajectoryPoint>& traj) {
  if (traj.empty()) throw std::invalid_argument("xpi_fidelity: empty trajectory");
  std::size_t best = 0;
  for (std::size_t i = 1; i < traj.size(); ++i)
    if (traj[i].p1 > traj[best].p1) best = i;
  if (best + 1 == traj.size() && traj.size() > 2 &&
      traj[best].p1 > traj[best - 1].p1 + 1e-12)
    throw std::invalid_argument("xpi_fidelity: trajectory too short (no maximum)");
  return {traj[best].p1, static_cast<int>(best) + 1};
}

// Refined (fractional) nu_pi from a parabola through the P1 maximum.
inline double nu_pi_refined(const std::vector<TrajectoryPoint>& traj) {
  const XpiResult r = xpi_fidelity(traj);
  const std::size_t i = static_cast<std::size_t>(r.nu_pi_effective - 1);
  if (i == 0 || i + 1 >= traj.size()) return static_cast<double>(r.nu_pi_effective);
  const double ym = traj[i - 1].p1, y0 = traj[i].p1, yp = traj[i + 1].p1;
  const double denom = ym - 2.0 * y0 + yp;
  if (std::abs(denom) < 1e-300) return static_cast<double>(r.nu_pi_effective);
  return static_cast<double>(r.nu_pi_effective) + 0.5 * (ym - yp) / denom;
}

// Finds Omega_d such that the no-decay continuous evolution reaches its P1
// maximum at target_nu_pi pulses (within a quarter pulse in the refined
// estimate), iterating Omega_d <- Omega_d * nu_pi(Omega_d) / target.
inline double normalize_coupling(const QubitModel& qubit, double sigma_s, int k,
                                 int target_nu_pi,
                                 const ContinuousRunConfig& cfg = {}) {
  QubitModel ideal = qubit;
  ideal.T1 = ideal.Tphi = std::numeric_limits<double>::infinity();
  const double fd = 1.0 / (static_cast<double>(k) * ideal.qubit_period());
  double omega = 0.5 * kPi / static_cast<double>(target_nu_pi);  // delta guess
  for (int iter = 0; iter < 24; ++iter) {
    const int n = static_cast<int>(std::ceil(target_nu_pi * 1.35)) + 4;
    const PulseTrain train = build_pulse_train(n, sigma_s, fd);
    const auto traj =
        evolve_continuous(ideal, train, omega, DensityState::ground(2),
                          idle_center_times(train, ideal, k), cfg);
    double nu;
    if (traj.back().p1 >= traj[traj.size() - 2].p1) {
      // Still rising at the end of the window (drive weaker than the delta
      // guess): extrapolate from the accumulated tip angle at the last pulse.
      const double theta =
          2.0 * std::asin(std::sqrt(std::clamp(traj.back().p1, 0.0, 1.0)));
      if (theta < 1e-6)
        throw std::runtime_error("normalize_coupling: no measurable tip");
      nu = kPi * static_cast<double>(traj.size()) / theta;
    } else {
      nu = nu_pi_refined(traj);
    }
    if (std::abs(nu - static_cast<double>(target_nu_pi)) <= 0.25) return omega;
    omega *= nu / static_cast<double>(target_nu_pi);
  }
  throw std::runtime_error("normalize_coupling: did not converge");
}

}  // namespace jpg
