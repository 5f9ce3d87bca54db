#pragma once

// Gate-infidelity budget terms and the array power model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "jpg/constants.hpp"
#include "jpg/jj_core.hpp"
#include "jpg/qubit_sim.hpp"
#include "jpg/rng.hpp"
#include "jpg/waveform.hpp"

namespace jpg {

enum class DigitizationForm { LiteralOverUnder, StateFidelity };

// Worst-case infidelity from rotating in integer pulse steps.
// LiteralOverUnder evaluates 1 - sin^2(pi (nu +- 1/2) / nu) exactly as an
// over/under-rotation of half a pulse applied at the drive phase; the
// StateFidelity form sin^2(pi / (4 nu)) is the excited-state population error
// of the same half-pulse miss and is the default elsewhere in this library.
inline double digitization_infidelity(int nu_pi,
                                      DigitizationForm form = DigitizationForm::StateFidelity) {
  if (nu_pi < 1) throw std::invalid_argument("digitization_infidelity: nu_pi must be >= 1");
  const double nu = static_cast<double>(nu_pi);
  switch (form) {
    case DigitizationForm::LiteralOverUnder: {
      const double over = 1.0 - std::pow(std::sin(kPi * (nu + 0.5) / nu), 2);
      const double under = 1.0 - std::pow(std::sin(kPi * (nu - 0.5) / nu), 2);
      return std::max(over, under);
    }
    case DigitizationForm::StateFidelity:
      return std::pow(std::sin(kPi / (4.0 * nu)), 2);
  }
  throw std::logic_error("digitization_infidelity: unknown form");
}

struct CoherenceLimit {
  double simulated = 0.0;  // kick-model X_pi infidelity, decay only
  double analytic = 0.0;   // (t_g / 3) (1/T1 + 1/T2)
};

// Infidelity floor of an X_pi gate of duration gate_time set purely by qubit
// decay. Simulated value spreads the rotation over ideal instantaneous kicks
// with exact free decay between them.
inline CoherenceLimit coherence_limit(double gate_time, double T1, double Tphi,
                                      double omega_10 = kTwoPi * 5.37e9, int k = 2,
                                      int n_pulses_min = 64) {
  if (gate_time <= 0.0 || T1 <= 0.0 || Tphi <= 0.0)
    throw std::invalid_argument("coherence_limit: inputs must be positive");
  QubitModel q;
  q.omega_10 = omega_10;
  q.T1 = T1;
  q.Tphi = Tphi;

  // Pulse count follows the physical k-subharmonic timing when it fits,
  // otherwise a fixed fine split so short gates still integrate the decay.
  const double Tq = q.qubit_period();
  int n = static_cast<int>(std::lround(gate_time / (k * Tq)));
  n = std::max(n, n_pulses_min);
  const double delta_theta = kPi / static_cast<double>(n);

  QubitModel q_scaled = q;
  // evolve_discrete steps in units of k * Tq; rescale the period so that n
  // kicks span exactly gate_time without changing the decay rates.
  q_scaled.omega_10 = kTwoPi * n * k / gate_time;

  std::vector<double> az(static_cast<std::size_t>(n), 0.0);
  const auto traj = evolve_discrete(q_scaled, delta_theta, k, n, az);
  double p1_max = 0.0;
  for (const auto& pt : traj) p1_max = std::max(p1_max, pt.p1);

  CoherenceLimit out;
  out.simulated = 1.0 - p1_max;
  const double T2 = q.T2();
  out.analytic = (gate_time / 3.0) * (1.0 / T1 + 1.0 / T2);
  return out;
}

struct CombinedCurvePoint {
  int nu_pi = 0;
  double digitization = 0.0;
  double coherence = 0.0;
  double combined = 0.0;
};

struct CombinedCurve {
  std::vector<CombinedCurvePoint> points;
  int argmin_nu_pi = 0;
  double min_infidelity = 0.0;
};

// Digitization error falls with nu_pi while the decay-limited error grows with
// the gate duration nu_pi * k * T_q; the sum has an interior minimum.
inline CombinedCurve combined_digitization_curve(const std::vector<int>& nu_grid, double T1,
                                                 double Tphi, double omega_10 = kTwoPi * 5.37e9,
                                                 int k = 2) {
  if (nu_grid.empty()) throw std::invalid_argument("combined_digitization_curve: empty grid");
  const double Tq = kTwoPi / omega_10;
  CombinedCurve out;
  out.min_infidelity = std::numeric_limits<double>::infinity();
  for (int nu : nu_grid) {
    CombinedCurvePoint p;
    p.nu_pi = nu;
    p.digitization = digitization_infidelity(nu, DigitizationForm::StateFidelity);
    const bool decay_off = !std::isfinite(T1) || !std::isfinite(Tphi);
    p.coherence = decay_off ? 0.0 : coherence_limit(nu * k * Tq, T1, Tphi, omega_10, k).analytic;
    p.combined = p.digitization + p.coherence;
    if (p.combined < out.min_infidelity) {
      out.min_infidelity = p.combined;
      out.argmin_nu_pi = nu;
    }
    out.points.push_back(p);
  }
  return out;
}

struct PulseWidthInfidelity {
  double total = 0.0;       // 1 - F of the full Lindblad X_pi at this width
  double coherence = 0.0;   // decay-only floor at the same gate duration
  double pulse_only = 0.0;  // total - coherence
  int nu_pi_effective = 0;
  double omega_drive = 0.0;  // normalized coupling used for the run
};

// Full continuous-drive X_pi at pulse width sigma (in units of T_q), with the
// coupling re-normalized so the pi time lands on target_nu_pi pulses.
inline PulseWidthInfidelity pulse_width_infidelity(double sigma_over_Tq, int target_nu_pi,
                                                   const QubitModel& qubit, int k = 2) {
  if (sigma_over_Tq <= 0.0 || sigma_over_Tq > 0.3)
    throw std::invalid_argument("pulse_width_infidelity: sigma/Tq must be in (0, 0.3]");
  const double Tq = qubit.qubit_period();
  const double sigma = sigma_over_Tq * Tq;
  const double f_d = 1.0 / (k * Tq);

  // Calibrate the coupling on the lossless qubit subspace, as a Rabi-fit
  // amplitude calibration would; leakage barely moves the P1 maximum.
  QubitModel ideal = qubit;
  ideal.T1 = std::numeric_limits<double>::infinity();
  ideal.Tphi = std::numeric_limits<double>::infinity();
  ideal.levels = 2;
  const double omega_d = normalize_coupling(ideal, sigma, k, target_nu_pi);

  const int n_pulses = target_nu_pi + target_nu_pi / 4 + 8;
  const auto train = build_pulse_train(n_pulses, sigma, f_d);

  const auto sample_times = idle_center_times(train, qubit, k);
  const auto traj = evolve_continuous(qubit, train, omega_d,
                                      DensityState::ground(qubit.levels), sample_times);
  const auto xr = xpi_fidelity(traj);

  PulseWidthInfidelity out;
  out.total = 1.0 - xr.fidelity;
  out.nu_pi_effective = xr.nu_pi_effective;
  out.omega_drive = omega_d;
  const bool decay_off = !std::isfinite(qubit.T1) || !std::isfinite(qubit.Tphi);
  if (decay_off) {
    out.coherence = 0.0;
  } else {
    const double t_gate = xr.nu_pi_effective * k * Tq;
    out.coherence = coherence_limit(t_gate, qubit.T1, qubit.Tphi, qubit.omega_10, k).simulated;
  }
  out.pulse_only = std::max(0.0, out.total - out.coherence);
  return out;
}

struct LeakageReference {
  int nu_pi = 352;
  double alpha = 0.05;
  double infidelity = 7.0e-4;
};

// Leakage to the second excited state, anchored at a reference working point
// and scaled as nu_pi^-2. Anharmonicity values away from the anchored table
// require opting in to 1/alpha^2 extrapolation.
inline double leakage_infidelity(int nu_pi, double alpha, bool extrapolate_alpha = false,
                                 const std::vector<LeakageReference>& table = {
                                     LeakageReference{}}) {
  if (nu_pi < 1) throw std::invalid_argument("leakage_infidelity: nu_pi must be >= 1");
  if (alpha <= 0.0 || alpha >= 1.0)
    throw std::invalid_argument("leakage_infidelity: alpha must be in (0, 1)");
  if (table.empty()) throw std::invalid_argument("leakage_infidelity: empty reference table");

  const LeakageReference* best = nullptr;
  for (const auto& ref : table) {
    if (std::abs(ref.alpha - alpha) < 1e-12) {
      best = &ref;
      break;
    }
  }
  if (best == nullptr) {
    if (!extrapolate_alpha)
      throw std::domain_error("leakage_infidelity: alpha not in reference table");
    double d_best = std::numeric_limits<double>::infinity();
    for (const auto& ref : table) {
      const double d = std::abs(std::log(ref.alpha / alpha));
      if (d < d_best) {
        d_best = d;
        best = &ref;
      }
    }
  }
  const double nu_scale = std::pow(static_cast<double>(best->nu_pi) / nu_pi, 2);
  const double alpha_scale = std::pow(best->alpha / alpha, 2);
  return best->infidelity * nu_scale * alpha_scale;
}

struct JitterInfidelity {
  double mean = 0.0;
  double mc_error = 0.0;  // standard error of the Monte-Carlo mean
  int n_trials = 0;
};

// Monte-Carlo X_pi infidelity from timing jitter of the pulse train.
//
// Drive-referred jitter moves the whole train against the qubit clock by one
// Gaussian offset per gate; a clock offset dt tilts the rotation axis in the
// qubit frame by omega_10 * dt and the missed state fidelity is
// sin^2(omega_10 dt / 2). Per-junction jitter averages across N_JJ
// independent junctions, so the arrival offset shrinks by sqrt(N_JJ) and the
// residual pulse broadening has negligible effect on the tip angle.
inline JitterInfidelity jitter_infidelity(double sigma_jitter, const QubitModel& qubit,
                                          int n_trials, std::uint64_t seed,
                                          JitterMode mode = JitterMode::Drive,
                                          int n_junctions = 4650) {
  if (n_trials < 100) throw std::invalid_argument("jitter_infidelity: need n_trials >= 100");
  if (sigma_jitter < 0.0) throw std::invalid_argument("jitter_infidelity: sigma must be >= 0");
  double sigma_eff = sigma_jitter;
  if (mode == JitterMode::PerJunction) {
    if (n_junctions < 1) throw std::invalid_argument("jitter_infidelity: n_junctions >= 1");
    sigma_eff = sigma_jitter / std::sqrt(static_cast<double>(n_junctions));
  }

  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n_trials; ++i) {
    auto rng = make_stream(seed, static_cast<std::uint64_t>(i) + 0x4a495454ull);
    std::normal_distribution<double> dist(0.0, sigma_eff);
    const double dt = (sigma_eff > 0.0) ? dist(rng) : 0.0;
    const double inf = std::pow(std::sin(0.5 * qubit.omega_10 * dt), 2);
    sum += inf;
    sum2 += inf * inf;
  }
  JitterInfidelity out;
  out.n_trials = n_trials;
  out.mean = sum / n_trials;
  const double var = std::max(0.0, sum2 / n_trials - out.mean * out.mean);
  out.mc_error = std::sqrt(var / n_trials);
  return out;
}

enum class BudgetMethod { Analytic, Simulated, Scaled };

inline const char* budget_method_name(BudgetMethod m) {
  switch (m) {
    case BudgetMethod::Analytic: return "analytic";
    case BudgetMethod::Simulated: return "simulated";
    case BudgetMethod::Scaled: return "scaled";
  }
  return "unknown";
}

struct BudgetTerm {
  double value = 0.0;
  BudgetMethod method = BudgetMethod::Analytic;
};

struct InfidelityBudget {
  BudgetTerm digitization;
  BudgetTerm pulse_width;
  BudgetTerm leakage;
  BudgetTerm jitter;
  BudgetTerm coherence;
  double total = 0.0;
};

// Terms are independent and individually small, so the combined budget is the
// plain sum.
inline InfidelityBudget total_budget(BudgetTerm digitization, BudgetTerm pulse_width,
                                     BudgetTerm leakage, BudgetTerm jitter,
                                     BudgetTerm coherence) {
  for (const BudgetTerm* t : {&digitization, &pulse_width, &leakage, &jitter, &coherence}) {
    if (t->value < 0.0 || t->value > 1.0)
      throw std::invalid_argument("total_budget: terms must be probabilities");
  }
  InfidelityBudget b;
  b.digitization = digitization;
  b.pulse_width = pulse_width;
  b.leakage = leakage;
  b.jitter = jitter;
  b.coherence = coherence;
  b.total = digitization.value + pulse_width.value + leakage.value + jitter.value +
            coherence.value;
  return b;
}

struct AttenuationStage {
  std::string label;
  double attenuation_db = 0.0;
};

struct PowerOptions {
  double load_impedance = 50.0;              // ohms
  std::optional<double> pulse_sigma;         // seconds, for the launched-power estimate
  std::optional<double> launched_power_dbm;  // overrides the estimate when measured
  std::vector<AttenuationStage> stack = {
      {"3K", 9.0}, {"1K", 3.0}, {"0.05K", 6.0}, {"0.01K", 10.0}};
};

struct PowerReport {
  double on_chip_power = 0.0;  // watts
  double duty_cycle = 0.0;
  double output_power_dbm = 0.0;
  std::vector<std::pair<std::string, double>> stage_dissipation;  // watts per stage
};

// On-chip dissipation P = Phi0 * N_JJ * I_c * f_d * eta_d. The launched rf
// power defaults to the matched-load average power of the Gaussian pulse
// train; a measured value can be supplied instead. Each attenuator stage
// dissipates the fraction 1 - 10^(-a/10) of the power entering it.
inline PowerReport power_dissipation(const JunctionArrayParams& params, double drive_frequency,
                                     double duty_cycle, const PowerOptions& opts = {}) {
  if (duty_cycle < 0.0 || duty_cycle > 1.0)
    throw std::invalid_argument("power_dissipation: duty cycle must be in [0, 1]");
  if (drive_frequency < 0.0)
    throw std::invalid_argument("power_dissipation: drive frequency must be >= 0");

  PowerReport rep;
  rep.duty_cycle = duty_cycle;
  rep.on_chip_power =
      kPhi0 * params.n_junctions * params.critical_current * drive_frequency * duty_cycle;

  double launched_w = 0.0;
  if (opts.launched_power_dbm.has_value()) {
    launched_w = 1.0e-3 * std::pow(10.0, *opts.launched_power_dbm / 10.0);
  } else if (duty_cycle > 0.0 && drive_frequency > 0.0) {
    const double sigma = opts.pulse_sigma.value_or(0.18 / drive_frequency);
    const double area = params.n_junctions * kPhi0;
    const double pulse_energy =
        area * area / (2.0 * std::sqrt(kPi) * sigma * opts.load_impedance);
    launched_w = pulse_energy * drive_frequency * duty_cycle;
  }
  rep.output_power_dbm = (launched_w > 0.0)
                             ? 10.0 * std::log10(launched_w / 1.0e-3)
                             : -std::numeric_limits<double>::infinity();

  double p = launched_w;
  for (const auto& stage : opts.stack) {
    const double through = std::pow(10.0, -stage.attenuation_db / 10.0);
    rep.stage_dissipation.emplace_back(stage.label, p * (1.0 - through));
    p *= through;
  }
  return rep;
}

}  // namespace jpg
