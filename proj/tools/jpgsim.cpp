// jpgsim: command-line front end for the pulse-generator qubit-control
// simulator. Every command is deterministic given (config, seed); payload
// files are byte-identical across re-runs, only the manifest wall time moves.

#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jpg/config.hpp"
#include "jpg/experiments.hpp"
#include "jpg/fidelity.hpp"
#include "jpg/io.hpp"
#include "jpg/jj_core.hpp"
#include "jpg/parallel.hpp"
#include "jpg/qubit_sim.hpp"
#include "jpg/waveform.hpp"

namespace {

using jpg::ConfigError;
using jpg::RunConfig;

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
};

RunConfig load(const CliOptions& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = jpg::load_config(opts.config_path);
  } else {
    cfg.raw = nlohmann::json::object();
  }
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.out_dir) cfg.output_dir = *opts.out_dir;
  if (opts.threads) {
    if (*opts.threads < 1) throw ConfigError("--threads: must be >= 1");
    cfg.threads = *opts.threads;
  }
  if (cfg.output_dir.empty()) {
    const char* env = std::getenv("JPGSIM_OUT");
    cfg.output_dir = env ? env : "out";
  }
  return cfg;
}

jpg::OutputWriter make_writer(const RunConfig& cfg, const std::string& command) {
  jpg::OutputWriter w(cfg.output_dir, command, cfg.seed);
  w.manifest().config_hash = cfg.hash();
  w.manifest().config_echo = cfg.raw;
  return w;
}

double exp_num(const RunConfig& cfg, const std::string& key, double fallback) {
  return jpg::cfgdetail::get_number(cfg.experiment, "experiment", key, fallback);
}

int exp_int(const RunConfig& cfg, const std::string& key, int fallback, int min_value) {
  return jpg::cfgdetail::get_int(cfg.experiment, "experiment", key, fallback, min_value);
}

void check_experiment_keys(const RunConfig& cfg, const std::set<std::string>& allowed) {
  jpg::cfgdetail::reject_unknown(cfg.experiment, "experiment", allowed);
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] =
        n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return out;
}

// ---------------------------------------------------------------------------

int cmd_iv(const RunConfig& cfg) {
  check_experiment_keys(cfg, {"i_min", "i_max", "n_points", "periods"});
  const double i_min = exp_num(cfg, "i_min", 0.45);
  const double i_max = exp_num(cfg, "i_max", 1.00);
  const int n_points = exp_int(cfg, "n_points", 37, 2);
  const double periods = exp_num(cfg, "periods", 200.0);
  if (i_max <= i_min) throw ConfigError("experiment.i_max: must exceed i_min");

  auto w = make_writer(cfg, "iv");
  std::vector<double> bias;
  for (double i : linspace(i_min, i_max, n_points))
    bias.push_back(i * cfg.device.critical_current);

  const auto curve = jpg::compute_iv_curve(cfg.device, cfg.drive.i_ac, cfg.drive.frequency,
                                           bias, periods);
  jpg::CsvTable table;
  table.columns = {"bias_current_A", "voltage_V", "failed"};
  for (const auto& pt : curve.points)
    table.rows.push_back({pt.bias_current, pt.mean_voltage, pt.failed ? 1.0 : 0.0});
  w.write_csv("iv_curve.csv", table);

  const double target = jpg::shapiro_voltage(cfg.device.n_junctions, cfg.drive.frequency);
  const double tol = 0.5 * jpg::kPhi0 * cfg.drive.frequency;
  const auto locking =
      jpg::find_locking_range(curve, cfg.device.n_junctions, cfg.drive.frequency, tol);
  nlohmann::json j;
  j["target_voltage_V"] = target;
  j["voltage_tolerance_V"] = tol;
  j["found"] = locking.has_value();
  if (locking) {
    j["interval"] = {{"low_A", locking->low}, {"high_A", locking->high},
                     {"width_A", locking->width()}};
  }
  w.write_json("locking.json", j);
  w.finalize();
  return 0;
}

int cmd_rsj_pulse(const RunConfig& cfg) {
  check_experiment_keys(cfg, {"i_dc", "i_ac", "drive_ratio", "periods", "samples_per_period"});
  jpg::RsjDriveSpec drive;
  drive.i_dc = exp_num(cfg, "i_dc", 0.70);
  drive.i_ac = exp_num(cfg, "i_ac", cfg.drive.i_ac);
  drive.drive_ratio = exp_num(cfg, "drive_ratio",
                              cfg.drive.frequency / cfg.device.characteristic_frequency());
  const double periods = exp_num(cfg, "periods", 60.0);
  const int spp = exp_int(cfg, "samples_per_period", 96, 16);
  drive.duration = periods * drive.drive_period();
  drive.output_step = drive.drive_period() / spp;

  auto w = make_writer(cfg, "rsj-pulse");
  const auto trace = jpg::simulate_rsj(cfg.device, drive);

  jpg::CsvTable table;
  table.columns = {"theta", "phase_rad", "voltage_norm"};
  for (std::size_t i = 0; i < trace.theta.size(); ++i)
    table.rows.push_back({trace.theta[i], trace.phase[i], trace.voltage_norm[i]});
  w.write_csv("rsj_trace.csv", table);

  // pulse summary over the settled tail, in physical units
  const double tau = cfg.device.characteristic_time();
  const double icrn = cfg.device.critical_current * cfg.device.normal_resistance;
  const std::size_t start = trace.theta.size() / 5;
  std::vector<double> tail(trace.voltage_norm.begin() + static_cast<long>(start),
                           trace.voltage_norm.end());
  double vmax = 0.0;
  for (double v : tail) vmax = std::max(vmax, v);
  nlohmann::json j;
  j["pulses"] = nlohmann::json::array();
  if (vmax > 0.0) {
    const auto windows = jpg::extract_pulses(tail, 0.5 * vmax);
    // first and last windows are truncated by the buffer edges, so their
    // trapezoid areas undercount; report interior pulses only
    for (std::size_t wi = 1; wi + 1 < windows.size(); ++wi) {
      const auto& win = windows[wi];
      if (win.end - win.begin < 8) continue;
      std::vector<double> ts, vs;
      for (std::size_t i = win.begin; i < win.end; ++i) {
        ts.push_back(trace.theta[start + i] * tau / jpg::kTwoPi);
        vs.push_back(trace.voltage_norm[start + i] * icrn);
      }
      try {
        const auto fit = jpg::fit_gaussian_pulse(ts, vs);
        j["pulses"].push_back({{"center_s", fit.center},
                               {"sigma_s", fit.sigma},
                               {"sigma_over_tau", fit.sigma / tau},
                               {"amplitude_V", fit.amplitude},
                               {"area_Wb", fit.area},
                               {"area_Phi0", fit.area / jpg::kPhi0}});
      } catch (const std::exception&) {
        continue;
      }
    }
  }
  j["n_pulses"] = j["pulses"].size();
  w.write_json("pulse_fits.json", j);
  w.finalize();
  return 0;
}

int cmd_rabi(const RunConfig& cfg) {
  check_experiment_keys(cfg, {"bias_min", "bias_max", "n_bias", "nu_max", "nu_step",
                              "single_bias", "rsj_periods"});
  const double nu_max = exp_num(cfg, "nu_max", 1000.0);
  const double nu_step = exp_num(cfg, "nu_step", 4.0);
  if (nu_max < 8.0 || nu_step <= 0.0) throw ConfigError("experiment: bad nu grid");
  std::vector<double> nu_grid;
  for (double nu = nu_step; nu <= nu_max; nu += nu_step) nu_grid.push_back(nu);

  auto w = make_writer(cfg, "rabi");

  if (cfg.experiment.contains("single_bias")) {
    // delta-kick 1-D curve at the calibrated working point
    const double dtheta = jpg::kPi / static_cast<double>(cfg.drive.nu_pi);
    const auto traj = jpg::evolve_discrete(cfg.qubit, dtheta, cfg.drive.k,
                                           static_cast<int>(nu_max));
    jpg::CsvTable table;
    table.columns = {"nu_periods", "p1"};
    std::vector<double> nus, p1s;
    for (double nu : nu_grid) {
      const std::size_t n = static_cast<std::size_t>(nu);
      table.rows.push_back({nu, traj[n - 1].p1});
      nus.push_back(nu);
      p1s.push_back(traj[n - 1].p1);
    }
    w.write_csv("rabi_curve.csv", table);
    const auto fit = jpg::fit_rabi(nus, p1s);
    nlohmann::json j;
    j["model"] = fit.model;
    j["nu_pi"] = fit.get("nu_pi");
    j["nu_pi_stderr"] = fit.get_err("nu_pi");
    j["amplitude"] = fit.get("amplitude");
    j["offset"] = fit.get("offset");
    w.write_json("rabi_fit.json", j);
    w.finalize();
    return 0;
  }

  jpg::JpgChainConfig chain;
  chain.array = cfg.device;
  chain.i_ac = cfg.drive.i_ac;
  chain.drive_frequency = cfg.drive.frequency;
  chain.target_nu_pi = cfg.drive.nu_pi;
  chain.rsj_periods = exp_num(cfg, "rsj_periods", 160.0);
  const double b_min = exp_num(cfg, "bias_min", 0.50);
  const double b_max = exp_num(cfg, "bias_max", 0.95);
  const int n_bias = exp_int(cfg, "n_bias", 11, 2);
  std::vector<double> bias_grid;
  for (double b : linspace(b_min, b_max, n_bias))
    bias_grid.push_back(b * cfg.device.critical_current);

  const auto rec = jpg::rabi_scan(chain, cfg.qubit, bias_grid, nu_grid, cfg.seed,
                                  cfg.drive.k);
  jpg::CsvTable table;
  table.columns = {"bias_current_A", "nu_periods", "p1"};
  for (std::size_t i = 0; i < bias_grid.size(); ++i)
    for (std::size_t j = 0; j < nu_grid.size(); ++j)
      table.rows.push_back({bias_grid[i], nu_grid[j], rec.at(i, j)});
  w.write_csv("rabi_2d.csv", table);

  jpg::CsvTable nupi_table;
  nupi_table.columns = {"bias_current_A", "nu_pi", "nu_pi_stderr", "fit_ok"};
  for (std::size_t i = 0; i < bias_grid.size(); ++i) {
    std::vector<double> p1s(nu_grid.size());
    for (std::size_t j = 0; j < nu_grid.size(); ++j) p1s[j] = rec.at(i, j);
    try {
      const auto fit = jpg::fit_rabi(nu_grid, p1s);
      nupi_table.rows.push_back({bias_grid[i], fit.get("nu_pi"), fit.get_err("nu_pi"), 1.0});
    } catch (const std::exception&) {
      nupi_table.rows.push_back({bias_grid[i], 0.0, 0.0, 0.0});
    }
  }
  w.write_csv("nu_pi_vs_bias.csv", nupi_table);
  w.finalize();
  return 0;
}

int cmd_gate_sweep(const RunConfig& cfg) {
  check_experiment_keys(cfg, {"sigmas", "target_nu_pi"});
  std::vector<double> sigmas = {0.005, 0.05, 0.10, 0.15, 0.19};
  if (cfg.experiment.contains("sigmas")) {
    sigmas = jpg::cfgdetail::get_array(cfg.experiment, "experiment", "sigmas");
    if (sigmas.empty()) throw ConfigError("experiment.sigmas: must be non-empty");
  }
  for (double s : sigmas)
    if (s <= 0.0 || s > 0.3)
      throw ConfigError("experiment.sigmas: values must be in (0, 0.3]");
  const int target = exp_int(cfg, "target_nu_pi", cfg.drive.nu_pi, 2);

  auto w = make_writer(cfg, "gate-sweep");
  std::vector<jpg::PulseWidthInfidelity> results(sigmas.size());
  jpg::parallel_for(sigmas.size(), cfg.threads, [&](std::size_t i) {
    results[i] = jpg::pulse_width_infidelity(sigmas[i], target, cfg.qubit, cfg.drive.k);
  });

  jpg::CsvTable table;
  table.columns = {"sigma_over_Tq", "nu_pi_effective", "total_infidelity",
                   "pulse_only_infidelity", "coherence_infidelity", "omega_drive_rad_s"};
  for (std::size_t i = 0; i < sigmas.size(); ++i)
    table.rows.push_back({sigmas[i], static_cast<double>(results[i].nu_pi_effective),
                          results[i].total, results[i].pulse_only, results[i].coherence,
                          results[i].omega_drive});
  w.write_csv("gate_sweep.csv", table);
  w.finalize();
  return 0;
}

int cmd_stats(const RunConfig& cfg) {
  check_experiment_keys(cfg, {"n_repeats", "shots", "n_delays", "t_max", "detuning_hz",
                              "spam_loss", "n_bins"});
  const int n_repeats = exp_int(cfg, "n_repeats", 500, 1);
  const int shots = exp_int(cfg, "shots", 200, 1);
  const int n_delays = exp_int(cfg, "n_delays", 25, 4);
  const double t_max = exp_num(cfg, "t_max", 3.0 * cfg.qubit.T1);
  const double detuning = exp_num(cfg, "detuning_hz", 50e3);
  const double spam_loss = exp_num(cfg, "spam_loss", 0.0);
  const int n_bins = exp_int(cfg, "n_bins", 25, 1);
  if (!(t_max > 0.0)) throw ConfigError("experiment.t_max: must be positive and finite");

  auto w = make_writer(cfg, "stats");
  std::vector<double> delays;
  for (double t : linspace(t_max / n_delays, t_max, n_delays)) delays.push_back(t);

  const auto t1 = jpg::t1_experiment(cfg.qubit, n_repeats, delays, shots, cfg.seed, spam_loss);
  const auto ram = jpg::ramsey_experiment(cfg.qubit, n_repeats, delays, detuning, shots,
                                          cfg.seed, spam_loss);

  auto emit = [&w, n_bins](const std::string& stem, const jpg::DecayCampaignResult& res) {
    jpg::CsvTable samples;
    samples.columns = {"repeat", "fitted_time_s"};
    for (std::size_t i = 0; i < res.fitted_times.size(); ++i)
      samples.rows.push_back({static_cast<double>(i), res.fitted_times[i]});
    w.write_csv(stem + "_samples.csv", samples);

    const auto [mn, mx] =
        std::minmax_element(res.fitted_times.begin(), res.fitted_times.end());
    const double lo = *mn, hi = std::max(*mx, *mn + 1e-12);
    std::vector<int> counts(static_cast<std::size_t>(n_bins), 0);
    for (double t : res.fitted_times) {
      int b = static_cast<int>((t - lo) / (hi - lo) * n_bins);
      b = std::clamp(b, 0, n_bins - 1);
      ++counts[static_cast<std::size_t>(b)];
    }
    jpg::CsvTable hist;
    hist.columns = {"bin_center_s", "count"};
    for (int b = 0; b < n_bins; ++b)
      hist.rows.push_back({lo + (b + 0.5) * (hi - lo) / n_bins,
                           static_cast<double>(counts[static_cast<std::size_t>(b)])});
    w.write_csv(stem + "_histogram.csv", hist);
  };
  emit("t1", t1);
  emit("t2star", ram);

  nlohmann::json j;
  j["t1_mean_s"] = t1.distribution_mean;
  j["t1_std_s"] = t1.distribution_std;
  j["t1_n_fitted"] = t1.fitted_times.size();
  j["t2star_mean_s"] = ram.distribution_mean;
  j["t2star_std_s"] = ram.distribution_std;
  j["t2star_n_fitted"] = ram.fitted_times.size();
  w.write_json("stats_summary.json", j);
  w.finalize();
  return 0;
}

int cmd_readout(const RunConfig& cfg) {
  check_experiment_keys(cfg, {"n_shots", "lobe_separation", "noise_sigma", "readout_duration",
                              "p_th_true", "readout_photons", "critical_photons"});
  jpg::ReadoutModel model;
  model.lobe_separation = exp_num(cfg, "lobe_separation", 10.0);
  model.noise_sigma = exp_num(cfg, "noise_sigma", 1.0);
  model.readout_duration = exp_num(cfg, "readout_duration", 400e-9);
  model.p_th_true = exp_num(cfg, "p_th_true", 0.035);
  model.readout_photons = exp_num(cfg, "readout_photons", 50.0);
  model.critical_photons = exp_num(cfg, "critical_photons", 115.0);
  const int n_shots = exp_int(cfg, "n_shots", 10000, 1);
  if (n_shots < 1000)
    std::cerr << "warning: n_shots < 1000, mixture fit may be unreliable\n";

  auto w = make_writer(cfg, "readout");
  const auto no_pi = jpg::single_shot_batch(model, cfg.qubit, n_shots, false, cfg.seed);
  const auto with_pi = jpg::single_shot_batch(model, cfg.qubit, n_shots, true, cfg.seed);

  jpg::CsvTable shots;
  shots.columns = {"shot", "voltage_no_pi", "voltage_pi"};
  for (int i = 0; i < n_shots; ++i)
    shots.rows.push_back({static_cast<double>(i), no_pi[static_cast<std::size_t>(i)],
                          with_pi[static_cast<std::size_t>(i)]});
  w.write_csv("single_shots.csv", shots);

  nlohmann::json j;
  j["photon_number_warning"] = model.photon_number_warning();
  const double p_decay = 1.0 - std::exp(-model.readout_duration / cfg.qubit.T1);
  j["readout_decay_probability"] = p_decay;
  try {
    const auto est = jpg::estimate_pth(no_pi);
    j["p_th"] = est.value;
    j["p_th_uncertainty"] = est.uncertainty;
    j["no_pi_fit"] = {{"means", {est.fit.mean[0], est.fit.mean[1]}},
                      {"sigmas", {est.fit.sigma[0], est.fit.sigma[1]}},
                      {"weights", {est.fit.weight[0], est.fit.weight[1]}}};
  } catch (const std::exception& e) {
    j["p_th_error"] = e.what();
  }
  // SPAM from the two lobe batches via threshold misclassification rates
  double p10 = 0.0, p01 = 0.0;
  for (double v : no_pi) p10 += v > 0.0 ? 1.0 : 0.0;
  for (double v : with_pi) p01 += v <= 0.0 ? 1.0 : 0.0;
  p10 /= n_shots;
  p01 /= n_shots;
  j["p_1_given_0"] = p10;
  j["p_0_given_1"] = p01;
  j["spam_fidelity"] = jpg::spam_fidelity(p10, p01);
  w.write_json("readout.json", j);
  w.finalize();
  return 0;
}

int cmd_rb(const RunConfig& cfg) {
  check_experiment_keys(cfg, {"m_values", "sequences_per_length", "noise", "rescale"});
  jpg::RbConfig rb;
  rb.sequence_lengths = {1, 2, 3, 5, 7, 10, 14, 20, 28, 40, 56, 80, 100};
  if (cfg.experiment.contains("m_values")) {
    rb.sequence_lengths.clear();
    for (double m : jpg::cfgdetail::get_array(cfg.experiment, "experiment", "m_values"))
      rb.sequence_lengths.push_back(static_cast<int>(m));
  }
  rb.sequences_per_length = exp_int(cfg, "sequences_per_length", 30, 1);
  rb.clifford_rescale = exp_num(cfg, "rescale", 1.125);
  rb.seed = cfg.seed;

  jpg::RbNoiseModel noise;
  if (cfg.experiment.contains("noise")) {
    const auto& n = cfg.experiment.at("noise");
    jpg::cfgdetail::reject_unknown(n, "experiment.noise", {"kind", "r"});
    const std::string kind = n.value("kind", "none");
    if (kind == "none") {
      noise.kind = jpg::RbNoiseModel::Kind::None;
    } else if (kind == "depolarizing") {
      noise.kind = jpg::RbNoiseModel::Kind::Depolarizing;
      noise.depolarizing_r = jpg::cfgdetail::get_number(n, "experiment.noise", "r", 0.021);
      if (noise.depolarizing_r < 0.0 || noise.depolarizing_r > 0.5)
        throw ConfigError("experiment.noise.r: must be in [0, 0.5]");
    } else if (kind == "lindblad") {
      noise.kind = jpg::RbNoiseModel::Kind::LindbladChain;
      noise.qubit = cfg.qubit;
      noise.nu_pi = cfg.drive.nu_pi;
      noise.subharmonic_k = cfg.drive.k;
    } else {
      throw ConfigError("experiment.noise.kind: expected none|depolarizing|lindblad");
    }
  }

  auto w = make_writer(cfg, "rb");
  const auto run = jpg::run_rb(rb, noise);
  jpg::CsvTable table;
  table.columns = {"m", "m_rescaled", "mean_fidelity"};
  for (std::size_t i = 0; i < run.m_values.size(); ++i)
    table.rows.push_back({run.m_values[i], run.m_rescaled[i], run.mean_fidelity[i]});
  w.write_csv("rb_curve.csv", table);

  const auto fit = jpg::fit_rb(run.m_values, run.mean_fidelity);
  nlohmann::json j;
  j["model"] = fit.model;
  j["a"] = fit.get("a");
  j["p"] = fit.get("p");
  j["b"] = fit.get("b");
  j["r"] = fit.get("r");
  j["r_stderr"] = fit.get_err("r");
  w.write_json("rb_fit.json", j);
  w.finalize();
  return 0;
}

int cmd_budget(const RunConfig& cfg) {
  check_experiment_keys(cfg, {"eta_d", "sigma_jitter", "jitter_trials", "ideal",
                              "rb_r_reference"});
  const double eta_d = exp_num(cfg, "eta_d", 0.02);
  const double sigma_jitter = exp_num(cfg, "sigma_jitter", 3e-12);
  const int jitter_trials = exp_int(cfg, "jitter_trials", 2000, 100);
  const bool ideal = cfg.experiment.value("ideal", false);
  const double rb_reference = exp_num(cfg, "rb_r_reference", 0.021);
  if (eta_d < 0.0 || eta_d > 1.0) throw ConfigError("experiment.eta_d: must be in [0, 1]");

  auto w = make_writer(cfg, "budget");
  jpg::InfidelityBudget budget;
  if (ideal) {
    budget = jpg::total_budget({0.0, jpg::BudgetMethod::Analytic},
                               {0.0, jpg::BudgetMethod::Simulated},
                               {0.0, jpg::BudgetMethod::Scaled},
                               {0.0, jpg::BudgetMethod::Simulated},
                               {0.0, jpg::BudgetMethod::Simulated});
  } else {
    const int nu_pi = cfg.drive.nu_pi;
    const int k = cfg.drive.k;
    const double Tq = cfg.qubit.qubit_period();

    jpg::BudgetTerm dig{jpg::digitization_infidelity(nu_pi), jpg::BudgetMethod::Analytic};
    const double t_gate = (nu_pi + 2) * k * Tq;
    const bool decay = std::isfinite(cfg.qubit.T1) && std::isfinite(cfg.qubit.Tphi);
    jpg::BudgetTerm coh{0.0, jpg::BudgetMethod::Simulated};
    if (decay)
      coh.value = jpg::coherence_limit(t_gate, cfg.qubit.T1, cfg.qubit.Tphi,
                                       cfg.qubit.omega_10, k)
                      .simulated;
    const auto pw =
        jpg::pulse_width_infidelity(cfg.drive.sigma_over_Tq, nu_pi, cfg.qubit, k);
    jpg::BudgetTerm pulse{pw.pulse_only, jpg::BudgetMethod::Simulated};
    jpg::BudgetTerm leak{jpg::leakage_infidelity(nu_pi, cfg.qubit.anharmonicity),
                         jpg::BudgetMethod::Scaled};
    const auto jit = jpg::jitter_infidelity(sigma_jitter, cfg.qubit, jitter_trials,
                                            cfg.seed, jpg::JitterMode::Drive,
                                            cfg.device.n_junctions);
    jpg::BudgetTerm jitter{jit.mean, jpg::BudgetMethod::Simulated};
    budget = jpg::total_budget(dig, pulse, leak, jitter, coh);
  }

  nlohmann::json j;
  auto term = [](const jpg::BudgetTerm& t) {
    return nlohmann::json{{"value", t.value}, {"method", jpg::budget_method_name(t.method)}};
  };
  j["digitization"] = term(budget.digitization);
  j["pulse_width"] = term(budget.pulse_width);
  j["leakage"] = term(budget.leakage);
  j["jitter"] = term(budget.jitter);
  j["coherence"] = term(budget.coherence);
  j["total"] = budget.total;
  j["rb_r_reference"] = rb_reference;
  j["ratio_to_rb"] = rb_reference > 0.0 ? budget.total / rb_reference : 0.0;
  w.write_json("budget.json", j);

  const auto power = jpg::power_dissipation(cfg.device, cfg.drive.frequency, eta_d);
  nlohmann::json pj;
  pj["on_chip_power_W"] = power.on_chip_power;
  pj["duty_cycle"] = power.duty_cycle;
  pj["output_power_dbm"] = power.output_power_dbm;
  pj["stage_dissipation_W"] = nlohmann::json::object();
  for (const auto& [label, watts] : power.stage_dissipation)
    pj["stage_dissipation_W"][label] = watts;
  w.write_json("power.json", pj);
  w.finalize();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Josephson pulse generator qubit-control simulator"};
  app.require_subcommand(1);

  CliOptions opts;
  app.add_option("--config", opts.config_path, "JSON config file");
  app.add_option("--seed", opts.seed, "override the config seed");
  app.add_option("--out", opts.out_dir, "override the output directory");
  app.add_option("--threads", opts.threads, "cap worker threads");

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const RunConfig&);
  };
  const std::vector<Command> commands = {
      {"iv", "simulate the array I-V curve and locking range", cmd_iv},
      {"rsj-pulse", "raw single-junction pulse simulation", cmd_rsj_pulse},
      {"rabi", "Rabi scans versus bias and pulse count", cmd_rabi},
      {"gate-sweep", "X_pi infidelity versus pulse width", cmd_gate_sweep},
      {"stats", "repeated T1 and Ramsey campaigns", cmd_stats},
      {"readout", "single-shot readout histograms and thermal population", cmd_readout},
      {"rb", "randomized benchmarking campaign", cmd_rb},
      {"budget", "infidelity budget and power report", cmd_budget},
  };
  for (const auto& c : commands) app.add_subcommand(c.name, c.help);

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = load(opts);
    for (const auto& c : commands) {
      if (app.got_subcommand(c.name)) return c.run(cfg);
    }
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const jpg::OdeFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}
