#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "jpg/fit.hpp"
#include "jpg/jj_core.hpp"
#include "jpg/qubit_sim.hpp"
#include "jpg/rng.hpp"
#include "jpg/waveform.hpp"

namespace jpg {

struct AxisGrid {
  std::string name;
  std::string unit;
  std::vector<double> values;
};

// Generic sweep result: outer product of the axes, row-major with the first
// axis slowest.
struct ExperimentRecord {
  std::vector<AxisGrid> axes;
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::map<std::string, double> metadata;

  std::size_t expected_size() const {
    std::size_t n = 1;
    for (const auto& a : axes) n *= a.values.size();
    return n;
  }
  double& at(std::size_t i, std::size_t j) {
    return values[i * axes[1].values.size() + j];
  }
  double at(std::size_t i, std::size_t j) const {
    return values[i * axes[1].values.size() + j];
  }
  void check() const {
    if (values.size() != expected_size())
      throw std::logic_error("ExperimentRecord: shape mismatch");
    for (double v : values)
      if (!std::isfinite(v)) throw std::logic_error("ExperimentRecord: non-finite value");
  }
};

struct FitParam {
  std::string name;
  double value;
  double stderr_;
};

struct FitResult {
  std::string model;
  std::vector<FitParam> params;
  double residual_norm = 0.0;
  bool converged = false;

  double get(const std::string& name) const {
    for (const auto& p : params)
      if (p.name == name) return p.value;
    throw std::out_of_range("FitResult: no parameter " + name);
  }
  double get_err(const std::string& name) const {
    for (const auto& p : params)
      if (p.name == name) return p.stderr_;
    throw std::out_of_range("FitResult: no parameter " + name);
  }
};

// ---------------------------------------------------------------------------
// Rabi fitting: P1(nu) = offset + amplitude * sin^2(pi nu / (2 nu_pi)).

inline FitResult fit_rabi(const std::vector<double>& nu,
                          const std::vector<double>& p1) {
  if (nu.size() != p1.size() || nu.size() < 8)
    throw std::invalid_argument("fit_rabi: bad input lengths");
  const auto [mn_it, mx_it] = std::minmax_element(p1.begin(), p1.end());
  if (*mx_it - *mn_it < 0.05)
    throw std::runtime_error("fit_rabi: no oscillation detected");

  auto model = [](const std::vector<double>& p, double x) {
    const double s = std::sin(kPi * x / (2.0 * p[0]));
    return p[2] + p[1] * s * s;
  };
  // Coarse scan for the period seed: first crossing of the midpoint going up.
  double best_nu = 0.0, best_cost = std::numeric_limits<double>::infinity();
  const double span = nu.back() - nu.front();
  for (double guess = span / 40.0; guess <= span * 1.5; guess *= 1.07) {
    std::vector<double> p = {guess, *mx_it - *mn_it, *mn_it};
    double c = 0.0;
    for (std::size_t i = 0; i < nu.size(); ++i) {
      const double r = p1[i] - model(p, nu[i]);
      c += r * r;
    }
    if (c < best_cost) {
      best_cost = c;
      best_nu = guess;
    }
  }
  CurveFit fit = fit_least_squares(model, nu, p1,
                                   {best_nu, *mx_it - *mn_it, *mn_it});
  if (!fit.converged || std::abs(fit.params[1]) < 0.05)
    throw std::runtime_error("fit_rabi: no oscillation detected");
  FitResult out;
  out.model = "rabi_sin2";
  out.params = {{"nu_pi", std::abs(fit.params[0]), fit.stderrs[0]},
                {"amplitude", fit.params[1], fit.stderrs[1]},
                {"offset", fit.params[2], fit.stderrs[2]}};
  out.residual_norm = fit.residual_norm;
  out.converged = true;
  return out;
}

// ---------------------------------------------------------------------------
// JPG chain: maps bias current to per-pulse behavior via the RSJ model.

struct JpgChainConfig {
  JunctionArrayParams array;
  double i_ac = 0.6;
  double drive_frequency = 2.685e9;  // Hz
  double target_nu_pi = 352.0;       // tip normalization anchor
  double reference_bias = 0.0;       // A; 0 -> locking-range midpoint
  double rsj_periods = 160.0;        // periods simulated per bias point
};

struct BiasPointResponse {
  double bias;              // A
  double pulses_per_period; // 1.0 when locked
  double sigma_seconds;     // fitted Gaussian width of the output pulses
  bool locked;
};

// Simulates one bias point and summarizes pulsing behavior.
inline BiasPointResponse characterize_bias_point(const JpgChainConfig& cfg,
                                                 double bias_amps) {
  const double fc = cfg.array.characteristic_frequency();
  RsjDriveSpec drive;
  drive.i_dc = bias_amps / cfg.array.critical_current;
  drive.i_ac = cfg.i_ac;
  drive.drive_ratio = cfg.drive_frequency / fc;
  drive.duration = cfg.rsj_periods * drive.drive_period();
  drive.output_step = drive.drive_period() / 96.0;
  const RsjTrace tr = simulate_rsj(cfg.array, drive);

  BiasPointResponse resp{};
  resp.bias = bias_amps;
  const double warmup = 0.2;
  const std::size_t start = static_cast<std::size_t>(warmup * tr.theta.size());
  // pulses per period from mean phase winding
  const double mean_v = mean_voltage_norm(tr, warmup);
  resp.pulses_per_period = mean_v / drive.drive_ratio;
  resp.locked = std::abs(resp.pulses_per_period - 1.0) < 0.02;

  // width of a representative pulse, in seconds
  std::vector<double> tail_v(tr.voltage_norm.begin() + static_cast<long>(start),
                             tr.voltage_norm.end());
  double vmax = 0.0;
  for (double v : tail_v) vmax = std::max(vmax, v);
  resp.sigma_seconds = 0.0;
  if (vmax > 0.05) {
    const auto windows = extract_pulses(tail_v, 0.5 * vmax);
    const double tau = cfg.array.characteristic_time();
    const double icrn = cfg.array.critical_current * cfg.array.normal_resistance;
    for (const auto& w : windows) {
      if (w.end - w.begin < 8) continue;
      std::vector<double> ts, vs;
      for (std::size_t i = w.begin; i < w.end; ++i) {
        ts.push_back(tr.theta[start + i] * tau / kTwoPi);
        vs.push_back(tr.voltage_norm[start + i] * icrn);
      }
      try {
        resp.sigma_seconds = fit_gaussian_pulse(ts, vs).sigma;
        break;
      } catch (const std::exception&) {
        continue;
      }
    }
  }
  return resp;
}

// Tip angle per drive period at a bias point, relative to the reference
// point. Wider pulses couple less drive power at the qubit frequency
// (Gaussian spectral weight); unlocked points scale with pulsing efficiency.
inline double relative_tip_factor(const BiasPointResponse& at,
                                  const BiasPointResponse& ref,
                                  double omega_10) {
  const double wref = std::exp(-0.5 * omega_10 * omega_10 *
                               ref.sigma_seconds * ref.sigma_seconds);
  const double wat = at.sigma_seconds > 0.0
                         ? std::exp(-0.5 * omega_10 * omega_10 *
                                    at.sigma_seconds * at.sigma_seconds)
                         : 0.0;
  const double eff = std::clamp(at.pulses_per_period, 0.0, 1.0);
  return eff * (wref > 0.0 ? wat / wref : 0.0);
}

// 2-D Rabi scan P1(I_b, nu). Inside the locking range the oscillation period
// is set by the reference nu_pi; off the step the pulses widen or vanish.
inline ExperimentRecord rabi_scan(const JpgChainConfig& cfg,
                                  const QubitModel& qubit,
                                  const std::vector<double>& bias_grid,
                                  const std::vector<double>& nu_grid,
                                  std::uint64_t seed = 0, int k = 2) {
  if (bias_grid.empty() || nu_grid.empty())
    throw std::invalid_argument("rabi_scan: empty grid");
  qubit.validate();

  double ref_bias = cfg.reference_bias;
  std::vector<BiasPointResponse> resp(bias_grid.size());
  for (std::size_t i = 0; i < bias_grid.size(); ++i)
    resp[i] = characterize_bias_point(cfg, bias_grid[i]);
  BiasPointResponse ref;
  if (ref_bias > 0.0) {
    ref = characterize_bias_point(cfg, ref_bias);
  } else {
    // midpoint of the locked sub-grid
    std::vector<std::size_t> locked;
    for (std::size_t i = 0; i < resp.size(); ++i)
      if (resp[i].locked) locked.push_back(i);
    if (locked.empty())
      throw std::runtime_error("rabi_scan: no locked bias point in grid");
    ref = resp[locked[locked.size() / 2]];
  }

  ExperimentRecord rec;
  rec.seed = seed;
  rec.axes = {{"bias_current", "A", bias_grid}, {"nu", "periods", nu_grid}};
  rec.values.assign(rec.expected_size(), 0.0);
  const double dtheta_ref = kPi / cfg.target_nu_pi;
  for (std::size_t i = 0; i < bias_grid.size(); ++i) {
    const double dtheta = dtheta_ref * relative_tip_factor(resp[i], ref, qubit.omega_10);
    const int n_max = static_cast<int>(std::llround(nu_grid.back())) + 1;
    const auto traj = evolve_discrete(qubit, dtheta, k, std::max(n_max, 1));
    for (std::size_t j = 0; j < nu_grid.size(); ++j) {
      const int n = static_cast<int>(std::llround(nu_grid[j]));
      rec.at(i, j) = n >= 1 ? traj[static_cast<std::size_t>(n - 1)].p1
                            : excited_population(DensityState::ground(2));
    }
  }
  rec.check();
  return rec;
}

// Rabi chevron from detuned discrete kicks.
inline ExperimentRecord rabi_chevron(const QubitModel& qubit, double delta_theta,
                                     int k,
                                     const std::vector<double>& detuning_grid,
                                     const std::vector<double>& nu_grid) {
  ExperimentRecord rec;
  rec.axes = {{"detuning", "rad/s", detuning_grid}, {"nu", "periods", nu_grid}};
  rec.values.assign(rec.expected_size(), 0.0);
  const int n_max = static_cast<int>(std::llround(
      *std::max_element(nu_grid.begin(), nu_grid.end())));
  for (std::size_t i = 0; i < detuning_grid.size(); ++i) {
    // drive detuning delta_wd shifts pulse arrival phase by k * delta_wd * Tq
    // per pulse; model as detuned free precession between kicks
    const auto traj = evolve_discrete(qubit, delta_theta, k, n_max, {},
                                      static_cast<double>(k) * detuning_grid[i]);
    for (std::size_t j = 0; j < nu_grid.size(); ++j) {
      const int n = static_cast<int>(std::llround(nu_grid[j]));
      rec.at(i, j) = n >= 1 ? traj[static_cast<std::size_t>(n - 1)].p1 : 0.0;
    }
  }
  rec.check();
  return rec;
}

// ---------------------------------------------------------------------------
// T1 / Ramsey campaigns with shot noise.

struct DecayCampaignResult {
  ExperimentRecord record;          // (repeat, delay) -> P1 estimate
  std::vector<FitResult> fits;      // one per repeat
  std::vector<double> fitted_times; // converged repeats only
  double distribution_mean = 0.0;
  double distribution_std = 0.0;
};

inline void finalize_distribution(DecayCampaignResult& out) {
  double m = 0.0;
  for (double t : out.fitted_times) m += t;
  m /= static_cast<double>(out.fitted_times.size());
  double v = 0.0;
  for (double t : out.fitted_times) v += (t - m) * (t - m);
  out.distribution_mean = m;
  out.distribution_std = std::sqrt(
      v / std::max<std::size_t>(1, out.fitted_times.size() - 1));
}

// Excite - wait - measure. True P1(t) = (1 - spam_loss) exp(-t / T1); each
// grid point is estimated from `shots` Bernoulli draws.
inline DecayCampaignResult t1_experiment(const QubitModel& qubit, int n_repeats,
                                         const std::vector<double>& delays,
                                         int shots, std::uint64_t seed,
                                         double spam_loss = 0.0) {
  qubit.validate();
  if (n_repeats < 1 || delays.empty() || shots < 0)
    throw std::invalid_argument("t1_experiment: bad arguments");
  DecayCampaignResult out;
  std::vector<double> repeat_axis(static_cast<std::size_t>(n_repeats));
  for (int i = 0; i < n_repeats; ++i) repeat_axis[static_cast<std::size_t>(i)] = i;
  out.record.axes = {{"repeat", "", repeat_axis}, {"delay", "s", delays}};
  out.record.seed = seed;
  out.record.values.assign(out.record.expected_size(), 0.0);

  auto model = [](const std::vector<double>& p, double t) {
    return p[0] * std::exp(-t / p[1]) + p[2];
  };
  for (int repi = 0; repi < n_repeats; ++repi) {
    auto rng = make_stream(seed, static_cast<std::uint64_t>(repi));
    std::vector<double> p1(delays.size());
    for (std::size_t j = 0; j < delays.size(); ++j) {
      const double p = (1.0 - spam_loss) * std::exp(-delays[j] / qubit.T1);
      if (shots == 0) {
        p1[j] = p;
      } else {
        std::binomial_distribution<int> bin(shots, p);
        p1[j] = static_cast<double>(bin(rng)) / static_cast<double>(shots);
      }
      out.record.at(static_cast<std::size_t>(repi), j) = p1[j];
    }
    FitResult fr;
    fr.model = "exp_decay";
    try {
      CurveFit fit = fit_least_squares(model, delays, p1,
                                       {1.0 - spam_loss, qubit.T1 * 1.3, 0.0});
      fr.converged = fit.converged;
      fr.residual_norm = fit.residual_norm;
      fr.params = {{"amplitude", fit.params[0], fit.stderrs[0]},
                   {"T1", fit.params[1], fit.stderrs[1]},
                   {"offset", fit.params[2], fit.stderrs[2]}};
      if (fr.converged) out.fitted_times.push_back(fit.params[1]);
    } catch (const std::exception&) {
      fr.converged = false;
    }
    out.fits.push_back(std::move(fr));
  }
  if (out.fitted_times.empty())
    throw std::runtime_error("t1_experiment: every repeat failed to fit");
  finalize_distribution(out);
  out.record.check();
  return out;
}

// Two-pi/2-pulse fringe with artificial detuning; damped-cosine fit.
inline DecayCampaignResult ramsey_experiment(const QubitModel& qubit,
                                             int n_repeats,
                                             const std::vector<double>& delays,
                                             double artificial_detuning_hz,
                                             int shots, std::uint64_t seed,
                                             double spam_loss = 0.0) {
  qubit.validate();
  if (n_repeats < 1 || delays.empty() || shots < 0)
    throw std::invalid_argument("ramsey_experiment: bad arguments");
  DecayCampaignResult out;
  std::vector<double> repeat_axis(static_cast<std::size_t>(n_repeats));
  for (int i = 0; i < n_repeats; ++i) repeat_axis[static_cast<std::size_t>(i)] = i;
  out.record.axes = {{"repeat", "", repeat_axis}, {"delay", "s", delays}};
  out.record.seed = seed;
  out.record.values.assign(out.record.expected_size(), 0.0);

  const double t2 = qubit.T2();
  auto model = [](const std::vector<double>& p, double t) {
    // p: {amplitude, T2*, freq, phase, offset}
    return p[0] * std::exp(-t / p[1]) * std::cos(kTwoPi * p[2] * t + p[3]) + p[4];
  };
  for (int repi = 0; repi < n_repeats; ++repi) {
    auto rng = make_stream(seed, 0x52414D ^ static_cast<std::uint64_t>(repi));
    std::vector<double> p1(delays.size());
    for (std::size_t j = 0; j < delays.size(); ++j) {
      // X90 . wait(t) . X90 from |0>: P1 = 1/2 (1 + e^{-t/T2} cos(2 pi f t))
      const double fringe =
          0.5 * (1.0 + std::exp(-delays[j] / t2) *
                           std::cos(kTwoPi * artificial_detuning_hz * delays[j]));
      const double p = (1.0 - spam_loss) * fringe;
      if (shots == 0) {
        p1[j] = p;
      } else {
        std::binomial_distribution<int> bin(shots, p);
        p1[j] = static_cast<double>(bin(rng)) / static_cast<double>(shots);
      }
      out.record.at(static_cast<std::size_t>(repi), j) = p1[j];
    }
    FitResult fr;
    fr.model = "damped_cosine";
    try {
      CurveFit fit = fit_least_squares(
          model, delays, p1,
          {0.5 * (1.0 - spam_loss), t2 * 1.3, artificial_detuning_hz, 0.0, 0.5});
      fr.converged = fit.converged;
      fr.residual_norm = fit.residual_norm;
      fr.params = {{"amplitude", fit.params[0], fit.stderrs[0]},
                   {"T2star", fit.params[1], fit.stderrs[1]},
                   {"fringe_frequency", fit.params[2], fit.stderrs[2]},
                   {"phase", fit.params[3], fit.stderrs[3]},
                   {"offset", fit.params[4], fit.stderrs[4]}};
      if (fr.converged) out.fitted_times.push_back(fit.params[1]);
    } catch (const std::exception&) {
      fr.converged = false;
    }
    out.fits.push_back(std::move(fr));
  }
  if (out.fitted_times.empty())
    throw std::runtime_error("ramsey_experiment: every repeat failed to fit");
  finalize_distribution(out);
  out.record.check();
  return out;
}

// ---------------------------------------------------------------------------
// Y-axis phasing calibration (two X90 trains separated by n_phi delay
// samples). The qubit-frame azimuth of the second train is
// 2 pi k n_phi / samples_per_period.

inline ExperimentRecord y_axis_calibration(const QubitModel& qubit,
                                           const std::vector<double>& n_phi_grid,
                                           const std::vector<double>& detuning_grid,
                                           int samples_per_period, int k,
                                           int nu_pi = 352) {
  qubit.validate();
  if (samples_per_period < 2 || k < 2)
    throw std::invalid_argument("y_axis_calibration: bad configuration");
  ExperimentRecord rec;
  rec.axes = {{"n_phi", "samples", n_phi_grid},
              {"detuning", "rad/s", detuning_grid}};
  rec.values.assign(rec.expected_size(), 0.0);
  const double dtheta = kPi / static_cast<double>(nu_pi);
  const int half = nu_pi / 2;
  for (std::size_t i = 0; i < n_phi_grid.size(); ++i) {
    const double azimuth = kTwoPi * static_cast<double>(k) * n_phi_grid[i] /
                           static_cast<double>(samples_per_period);
    for (std::size_t j = 0; j < detuning_grid.size(); ++j) {
      std::vector<double> azimuths(static_cast<std::size_t>(2 * half), 0.0);
      for (int n = half; n < 2 * half; ++n)
        azimuths[static_cast<std::size_t>(n)] = azimuth;
      const auto traj = evolve_discrete(qubit, dtheta, k, 2 * half, azimuths,
                                        static_cast<double>(k) * detuning_grid[j]);
      rec.at(i, j) = traj.back().p1;
    }
  }
  rec.check();
  return rec;
}

// ---------------------------------------------------------------------------
// Single-shot dispersive readout.

struct ReadoutModel {
  double bare_cavity_frequency = 0.0;  // rad/s (bookkeeping)
  double dispersive_shift = 0.0;       // rad/s (bookkeeping)
  double lobe_separation = 10.0;       // V between lobe centers
  double noise_sigma = 1.0;            // V
  double readout_duration = 400e-9;    // s
  double p_th_true = 0.0;
  double readout_photons = 50.0;       // n_r
  double critical_photons = 115.0;     // n_crit

  bool photon_number_warning() const {
    return readout_photons > 0.5 * critical_photons;
  }
  void validate() const {
    if (lobe_separation <= 0.0 || noise_sigma <= 0.0)
      throw std::invalid_argument("ReadoutModel: lobes must be separated and noisy");
    if (p_th_true < 0.0 || p_th_true > 1.0)
      throw std::invalid_argument("ReadoutModel: p_th_true out of range");
  }
};

// Per shot: thermal preparation, optional pi inversion, decay during readout,
// then a Gaussian lobe draw (|0> lobe at -sep/2, |1> lobe at +sep/2).
inline std::vector<double> single_shot_batch(const ReadoutModel& model,
                                             const QubitModel& qubit,
                                             int n_shots, bool apply_pi,
                                             std::uint64_t seed) {
  model.validate();
  qubit.validate();
  if (n_shots < 1) throw std::invalid_argument("single_shot_batch: n_shots < 1");
  auto rng = make_stream(seed, apply_pi ? 1 : 0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, model.noise_sigma);
  const double p_decay = 1.0 - std::exp(-model.readout_duration / qubit.T1);

  std::vector<double> volts(static_cast<std::size_t>(n_shots));
  for (int i = 0; i < n_shots; ++i) {
    bool excited = uni(rng) < model.p_th_true;
    if (apply_pi) excited = !excited;
    if (excited && uni(rng) < p_decay) excited = false;
    const double center = excited ? 0.5 * model.lobe_separation
                                  : -0.5 * model.lobe_separation;
    volts[static_cast<std::size_t>(i)] = center + noise(rng);
  }
  return volts;
}

struct PthEstimate {
  double value;
  double uncertainty;  // dominated by the decay-during-readout bound
  BimodalFit fit;
};

// Integral of the fitted two-component mixture above the zero-voltage
// threshold. The systematic uncertainty floor reflects decays during the
// readout window (~1% class).
inline PthEstimate estimate_pth(const std::vector<double>& no_pi_voltages,
                                double threshold = 0.0,
                                double systematic_floor = 0.01) {
  PthEstimate est{};
  est.fit = fit_bimodal_gaussian(no_pi_voltages);
  est.value = est.fit.weight[0] *
                  normal_tail_above(threshold, est.fit.mean[0], est.fit.sigma[0]) +
              est.fit.weight[1] *
                  normal_tail_above(threshold, est.fit.mean[1], est.fit.sigma[1]);
  const double n = static_cast<double>(no_pi_voltages.size());
  const double stat = std::sqrt(std::max(est.value * (1.0 - est.value), 1e-12) / n);
  est.uncertainty = std::max(systematic_floor, stat);
  return est;
}

inline double spam_fidelity(double p_1_given_0, double p_0_given_1) {
  if (p_1_given_0 < 0.0 || p_1_given_0 > 1.0 || p_0_given_1 < 0.0 ||
      p_0_given_1 > 1.0)
    throw std::invalid_argument("spam_fidelity: probabilities out of range");
  return 1.0 - p_1_given_0 - p_0_given_1;
}

// ---------------------------------------------------------------------------
// Randomized benchmarking with the 9-gate primitive/Pauli set.

struct RbConfig {
  std::vector<int> sequence_lengths;  // m values, ascending
  int sequences_per_length = 30;
  std::uint64_t seed = 0;
  double clifford_rescale = 1.125;

  void validate() const {
    if (sequence_lengths.empty() || sequences_per_length < 1)
      throw std::invalid_argument("RbConfig: need lengths and sequences");
    for (std::size_t i = 0; i < sequence_lengths.size(); ++i) {
      if (sequence_lengths[i] < 1 ||
          (i > 0 && sequence_lengths[i] <= sequence_lengths[i - 1]))
        throw std::invalid_argument("RbConfig: m values must be positive ascending");
    }
  }
};

inline const std::array<GateLabel, 9>& rb_gate_set() {
  static const std::array<GateLabel, 9> set = {
      GateLabel::I,        GateLabel::Xpi2,      GateLabel::MinusXpi2,
      GateLabel::Ypi2,     GateLabel::MinusYpi2, GateLabel::Xpi,
      GateLabel::MinusXpi, GateLabel::Ypi,       GateLabel::MinusYpi};
  return set;
}

inline Su2 gate_unitary(GateLabel g) {
  switch (g) {
    case GateLabel::I: return Su2::identity();
    case GateLabel::Xpi: return Su2::equatorial(kPi, 0.0);
    case GateLabel::MinusXpi: return Su2::equatorial(-kPi, 0.0);
    case GateLabel::Ypi: return Su2::equatorial(kPi, kPi / 2.0);
    case GateLabel::MinusYpi: return Su2::equatorial(-kPi, kPi / 2.0);
    case GateLabel::Xpi2: return Su2::equatorial(kPi / 2.0, 0.0);
    case GateLabel::MinusXpi2: return Su2::equatorial(-kPi / 2.0, 0.0);
    case GateLabel::Ypi2: return Su2::equatorial(kPi / 2.0, kPi / 2.0);
    case GateLabel::MinusYpi2: return Su2::equatorial(-kPi / 2.0, kPi / 2.0);
  }
  throw std::invalid_argument("gate_unitary: bad gate");
}

struct RbSequence {
  std::vector<GateLabel> gates;   // m random gates
  GateLabel recovery;
  int target_pole;                // 0 -> |0>, 1 -> |1>
  bool used_fallback = false;     // composed two-gate recovery
  GateLabel fallback_second = GateLabel::I;
};

// Pole-recovery convention: the recovery gate returns the ideal state to a
// sigma_z eigenstate. All sequence states are Bloch-cardinal so a single set
// element always suffices; the two-gate fallback is kept as a guarded path.
inline RbSequence make_rb_sequence(int m, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 8);
  RbSequence seq;
  seq.gates.reserve(static_cast<std::size_t>(m));
  Su2 u = Su2::identity();
  for (int i = 0; i < m; ++i) {
    const GateLabel g = rb_gate_set()[static_cast<std::size_t>(pick(rng))];
    seq.gates.push_back(g);
    u = gate_unitary(g) * u;
  }
  double x, y, z;
  constexpr double kPoleTol = 1e-9;
  // Prefer true sequence inversion (back to the ground pole); mixing ground-
  // and excited-pole recoveries biases the decay fit under non-unital noise.
  for (int pole = 0; pole <= 1; ++pole) {
    const double want = pole == 0 ? 1.0 : -1.0;
    for (GateLabel g : rb_gate_set()) {
      const Su2 total = gate_unitary(g) * u;
      total.bloch_from_ground(x, y, z);
      if (std::abs(z - want) < kPoleTol) {
        seq.recovery = g;
        seq.target_pole = pole;
        return seq;
      }
    }
  }
  // two-gate fallback: rotate onto the equator reference then to a pole
  for (GateLabel g1 : rb_gate_set())
    for (GateLabel g2 : rb_gate_set()) {
      const Su2 total = gate_unitary(g2) * gate_unitary(g1) * u;
      total.bloch_from_ground(x, y, z);
      if (std::abs(std::abs(z) - 1.0) < kPoleTol) {
        seq.recovery = g1;
        seq.used_fallback = true;
        seq.fallback_second = g2;
        seq.target_pole = z > 0.0 ? 0 : 1;
        return seq;
      }
    }
  throw std::runtime_error("make_rb_sequence: no recovery found");
}

inline std::vector<RbSequence> generate_rb_sequences(const RbConfig& cfg) {
  cfg.validate();
  std::vector<RbSequence> out;
  out.reserve(cfg.sequence_lengths.size() *
              static_cast<std::size_t>(cfg.sequences_per_length));
  std::uint64_t stream = 0;
  for (int m : cfg.sequence_lengths)
    for (int s = 0; s < cfg.sequences_per_length; ++s) {
      auto rng = make_stream(cfg.seed, stream++);
      out.push_back(make_rb_sequence(m, rng));
    }
  return out;
}

struct RbNoiseModel {
  enum class Kind { None, Depolarizing, LindbladChain } kind = Kind::None;
  double depolarizing_r = 0.0;  // per-gate error r = (1 - p)/2
  // Lindblad chain parameters
  QubitModel qubit = QubitModel::lossless(kTwoPi * 5.37e9);
  int nu_pi = 352;
  int subharmonic_k = 2;
};

// Every gate occupies a uniform nu_pi + 2 period waveform slot: half gates
// drive for nu_pi / 2 periods and idle for the remainder of the slot, so the
// decay exposure is the same for all set elements.
inline double gate_duration(GateLabel g, int nu_pi, int k, double qubit_period) {
  (void)g;
  return static_cast<double>(nu_pi + 2) * static_cast<double>(k) * qubit_period;
}

// Applies one gate with the configured noise to a 2-level density matrix.
inline void apply_rb_gate(DensityState& s, GateLabel g, const RbNoiseModel& noise) {
  if (noise.kind == RbNoiseModel::Kind::LindbladChain) {
    const double t = gate_duration(g, noise.nu_pi, noise.subharmonic_k,
                                   noise.qubit.qubit_period());
    // decay split around the rotation; durations are integer qubit periods
    // so the free phase winds to identity
    free_evolution(s, noise.qubit, 0.5 * t);
    apply_unitary_2x2(s, gate_unitary(g));
    free_evolution(s, noise.qubit, 0.5 * t);
    return;
  }
  apply_unitary_2x2(s, gate_unitary(g));
  if (noise.kind == RbNoiseModel::Kind::Depolarizing) {
    const double p_dep = 2.0 * noise.depolarizing_r;
    const Complex mix = Complex(0.5 * p_dep, 0.0);
    s.at(0, 0) = (1.0 - p_dep) * s.at(0, 0) + mix;
    s.at(1, 1) = (1.0 - p_dep) * s.at(1, 1) + mix;
    s.at(0, 1) *= (1.0 - p_dep);
    s.at(1, 0) *= (1.0 - p_dep);
  }
}

struct RbRunResult {
  ExperimentRecord record;  // (m index) -> mean sequence fidelity
  std::vector<double> m_values;
  std::vector<double> m_rescaled;
  std::vector<double> mean_fidelity;
};

inline RbRunResult run_rb(const RbConfig& cfg, const RbNoiseModel& noise) {
  cfg.validate();
  const auto sequences = generate_rb_sequences(cfg);
  RbRunResult out;
  std::size_t idx = 0;
  for (std::size_t mi = 0; mi < cfg.sequence_lengths.size(); ++mi) {
    double acc = 0.0;
    for (int s = 0; s < cfg.sequences_per_length; ++s, ++idx) {
      const RbSequence& seq = sequences[idx];
      DensityState rho = DensityState::ground(2);
      for (GateLabel g : seq.gates) apply_rb_gate(rho, g, noise);
      apply_rb_gate(rho, seq.recovery, noise);
      if (seq.used_fallback) apply_rb_gate(rho, seq.fallback_second, noise);
      const double p1 = excited_population(rho);
      acc += seq.target_pole == 1 ? p1 : 1.0 - p1;
    }
    const double m = static_cast<double>(cfg.sequence_lengths[mi]);
    out.m_values.push_back(m);
    out.m_rescaled.push_back(m * cfg.clifford_rescale);
    out.mean_fidelity.push_back(acc / cfg.sequences_per_length);
  }
  out.record.seed = cfg.seed;
  out.record.axes = {{"m", "gates", out.m_values},
                     {"observable", "", {0.0}}};
  out.record.values = out.mean_fidelity;
  out.record.check();
  return out;
}

// Fit F(m) = a p^m + b; per-gate error r = (1 - p) / 2.
inline FitResult fit_rb(const std::vector<double>& m,
                        const std::vector<double>& fidelity) {
  if (m.size() < 4 || m.size() != fidelity.size())
    throw std::invalid_argument("fit_rb: need >= 4 sequence lengths");
  auto model = [](const std::vector<double>& p, double x) {
    return p[0] * std::pow(std::clamp(p[1], 0.0, 1.0), x) + p[2];
  };
  // flat data carries no decay information: p = 1 fits exactly
  const auto [fmn, fmx] = std::minmax_element(fidelity.begin(), fidelity.end());
  if (*fmx - *fmn < 1e-9) {
    FitResult flat;
    flat.model = "rb_exponential";
    flat.params = {{"a", *fmx - 0.5, 0.0},
                   {"p", 1.0, 0.0},
                   {"b", 0.5, 0.0},
                   {"r", 0.0, 0.0}};
    flat.converged = true;
    return flat;
  }
  // seed p from the decay between the first and last points
  const double f0 = fidelity.front(), f1 = fidelity.back();
  double p_seed = 0.99;
  if (f0 - f1 > 1e-6 && f0 > 0.5)
    p_seed = std::clamp(
        std::pow(std::max((f1 - 0.5) / std::max(f0 - 0.5, 1e-9), 1e-6),
                 1.0 / std::max(m.back() - m.front(), 1.0)),
        0.5, 1.0);
  CurveFit fit = fit_least_squares(model, m, fidelity, {0.5, p_seed, 0.5});
  if (!fit.converged) throw std::runtime_error("fit_rb: non-convergence");
  const double p = std::clamp(fit.params[1], 0.0, 1.0);
  FitResult out;
  out.model = "rb_exponential";
  out.params = {{"a", fit.params[0], fit.stderrs[0]},
                {"p", p, fit.stderrs[1]},
                {"b", fit.params[2], fit.stderrs[2]},
                {"r", 0.5 * (1.0 - p), 0.5 * fit.stderrs[1]}};
  out.residual_norm = fit.residual_norm;
  out.converged = true;
  return out;
}

}  // namespace jpg
