#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "jpg/experiments.hpp"

using namespace jpg;

namespace {

QubitModel paper_qubit() {
  QubitModel q;
  q.omega_10 = kTwoPi * 5.37e9;
  q.T1 = 34e-6;
  q.Tphi = 68e-6;
  return q;
}

JpgChainConfig chain_config() {
  JpgChainConfig cfg;
  cfg.array.critical_current = 3.05e-3;
  cfg.array.normal_resistance = 6.93e-3;
  cfg.array.n_junctions = 4650;
  cfg.array.beta_c = 0.01;
  cfg.drive_frequency = 0.2 * cfg.array.characteristic_frequency();
  return cfg;
}

}  // namespace

TEST_CASE("rabi fit recovers the oscillation period") {
  std::vector<double> nu, p1;
  for (int n = 4; n <= 704; n += 4) {
    nu.push_back(n);
    const double s = std::sin(kPi * n / (2.0 * 352.0));
    // deterministic, zero-mean perturbation well under shot noise scale
    p1.push_back(0.95 * s * s + 0.02 + 0.004 * std::sin(7.3 * n));
  }
  const FitResult fr = fit_rabi(nu, p1);
  CHECK(fr.converged);
  CHECK(fr.get("nu_pi") == Catch::Approx(352.0).margin(0.5));
  CHECK(fr.get("amplitude") == Catch::Approx(0.95).margin(0.01));

  std::vector<double> flat(nu.size(), 0.4);
  CHECK_THROWS_WITH(fit_rabi(nu, flat), "fit_rabi: no oscillation detected");
}

TEST_CASE("bias point characterization on and off the locking step") {
  const auto cfg = chain_config();
  const double ic = cfg.array.critical_current;

  const auto locked = characterize_bias_point(cfg, 0.70 * ic);
  CHECK(locked.locked);
  CHECK(locked.pulses_per_period == Catch::Approx(1.0).margin(0.02));
  // one-pulse-per-period SFQ output: sigma/tau near 1.08 / 2 pi
  const double tau = cfg.array.characteristic_time();
  CHECK(locked.sigma_seconds / tau ==
        Catch::Approx(1.08 / kTwoPi).epsilon(0.10));

  const auto below = characterize_bias_point(cfg, 0.30 * ic);
  CHECK_FALSE(below.locked);
  CHECK(below.pulses_per_period < 0.1);
}

TEST_CASE("relative tip factor ordering") {
  BiasPointResponse ref{0.0, 1.0, 1.6e-11, true};
  const double w10 = kTwoPi * 5.37e9;
  CHECK(relative_tip_factor(ref, ref, w10) == Catch::Approx(1.0));

  BiasPointResponse wider = ref;
  wider.sigma_seconds = 2.4e-11;
  CHECK(relative_tip_factor(wider, ref, w10) < 1.0);
  CHECK(relative_tip_factor(wider, ref, w10) > 0.0);

  BiasPointResponse dead{0.0, 0.0, 0.0, false};
  CHECK(relative_tip_factor(dead, ref, w10) == 0.0);
}

TEST_CASE("bias-resolved Rabi map matches the closed form when locked") {
  auto cfg = chain_config();
  const double ic = cfg.array.critical_current;
  const auto q = QubitModel::lossless(kTwoPi * 5.37e9);
  std::vector<double> bias = {0.62 * ic, 0.70 * ic, 0.78 * ic};
  std::vector<double> nu;
  for (int n = 16; n <= 352; n += 16) nu.push_back(n);

  const auto rec = rabi_scan(cfg, q, bias, nu, 7);
  rec.check();
  // all three points sit on the same step; their pulse widths agree so the
  // tip factor is ~1 and every row follows sin^2(pi nu / (2 nu_pi))
  for (std::size_t i = 0; i < bias.size(); ++i)
    for (std::size_t j = 0; j < nu.size(); ++j) {
      const double s = std::sin(kPi * nu[j] / (2.0 * 352.0));
      CHECK(rec.at(i, j) == Catch::Approx(s * s).margin(0.05));
    }
}

TEST_CASE("chevron detuning reduces the oscillation contrast") {
  const auto q = QubitModel::lossless(kTwoPi * 5.37e9);
  std::vector<double> det = {0.0, kTwoPi * 2e6};
  std::vector<double> nu;
  for (int n = 8; n <= 352; n += 8) nu.push_back(n);
  const auto rec = rabi_chevron(q, kPi / 352.0, 2, det, nu);
  double max_on = 0.0, max_off = 0.0;
  for (std::size_t j = 0; j < nu.size(); ++j) {
    max_on = std::max(max_on, rec.at(0, j));
    max_off = std::max(max_off, rec.at(1, j));
    const double s = std::sin(kPi * nu[j] / (2.0 * 352.0));
    CHECK(rec.at(0, j) == Catch::Approx(s * s).margin(1e-9));
  }
  CHECK(max_on > 0.999);
  CHECK(max_off < max_on - 0.05);
}

TEST_CASE("relaxation campaign distribution centers on the true constant") {
  const auto q = paper_qubit();
  std::vector<double> delays;
  for (int i = 0; i <= 20; ++i) delays.push_back(3.0 * q.T1 * i / 20.0);

  const auto noiseless = t1_experiment(q, 1, delays, 0, 3);
  CHECK(noiseless.fitted_times.size() == 1);
  CHECK(noiseless.fitted_times[0] == Catch::Approx(34e-6).epsilon(1e-6));

  const auto campaign = t1_experiment(q, 40, delays, 400, 11);
  CHECK(campaign.fitted_times.size() >= 36);
  CHECK(campaign.distribution_mean == Catch::Approx(34e-6).margin(1.5e-6));
  CHECK(campaign.distribution_std > 0.0);
  CHECK(campaign.distribution_std < 8e-6);
}

TEST_CASE("Ramsey campaign recovers T2* and the fringe frequency") {
  const auto q = paper_qubit();
  std::vector<double> delays;
  for (int i = 0; i <= 40; ++i) delays.push_back(80e-6 * i / 40.0);

  const auto noiseless = ramsey_experiment(q, 1, delays, 50e3, 0, 5);
  CHECK(noiseless.fitted_times[0] == Catch::Approx(34e-6).epsilon(1e-4));
  CHECK(noiseless.fits[0].get("fringe_frequency") ==
        Catch::Approx(50e3).epsilon(1e-4));

  const auto campaign = ramsey_experiment(q, 30, delays, 50e3, 400, 13);
  CHECK(campaign.fitted_times.size() >= 25);
  CHECK(campaign.distribution_mean == Catch::Approx(34e-6).margin(2e-6));
}

TEST_CASE("determinism of seeded campaigns") {
  const auto q = paper_qubit();
  std::vector<double> delays = {0.0, 10e-6, 20e-6, 30e-6, 40e-6, 50e-6,
                                60e-6, 70e-6, 80e-6, 90e-6};
  const auto a = t1_experiment(q, 5, delays, 100, 42);
  const auto b = t1_experiment(q, 5, delays, 100, 42);
  CHECK(a.record.values == b.record.values);
  const auto c = t1_experiment(q, 5, delays, 100, 43);
  CHECK(a.record.values != c.record.values);
}

TEST_CASE("axis phasing calibration has the waveform-set period") {
  const auto q = QubitModel::lossless(kTwoPi * 5.37e9);
  std::vector<double> n_phi = {0, 3, 6, 12};
  std::vector<double> det = {0.0};
  const auto rec = y_axis_calibration(q, n_phi, det, 24, 2, 32);
  // n_phi = 0: the two X90 halves compose to a pi rotation
  CHECK(rec.at(0, 0) == Catch::Approx(1.0).margin(1e-9));
  // n_phi = 3: second half about Y leaves the -y state in place
  CHECK(rec.at(1, 0) == Catch::Approx(0.5).margin(1e-9));
  // n_phi = 6: second half about -X undoes the first
  CHECK(rec.at(2, 0) == Catch::Approx(0.0).margin(1e-9));
  // n_phi = 12: full sample period, same as n_phi = 0
  CHECK(rec.at(3, 0) == Catch::Approx(rec.at(0, 0)).margin(1e-9));
}

TEST_CASE("single-shot histogram and thermal-population estimate") {
  ReadoutModel rd;
  rd.lobe_separation = 10.0;
  rd.noise_sigma = 1.0;
  rd.readout_duration = 400e-9;
  rd.p_th_true = 0.035;
  const auto q = paper_qubit();

  // decay during the readout window: 1 - exp(-400 ns / 34 us) ~ 1.17%
  CHECK(1.0 - std::exp(-rd.readout_duration / q.T1) ==
        Catch::Approx(0.0117).margin(0.0002));

  const auto volts = single_shot_batch(rd, q, 10000, false, 21);
  REQUIRE(volts.size() == 10000);
  const auto est = estimate_pth(volts);
  CHECK(est.value == Catch::Approx(0.035).margin(0.01));
  CHECK(est.uncertainty >= 0.01);

  // pi-pulsed batch flips the dominant lobe
  const auto flipped = single_shot_batch(rd, q, 10000, true, 21);
  double mean = 0.0;
  for (double v : flipped) mean += v;
  CHECK(mean / 10000.0 > 3.0);

  CHECK(rd.photon_number_warning() == false);
  rd.readout_photons = 80.0;
  CHECK(rd.photon_number_warning() == true);
}

TEST_CASE("state preparation and measurement fidelity arithmetic") {
  CHECK(spam_fidelity(0.01, 0.02) == Catch::Approx(0.97));
  CHECK(spam_fidelity(0.0, 0.0) == Catch::Approx(1.0));
  CHECK_THROWS_AS(spam_fidelity(1.2, 0.0), std::invalid_argument);
}

TEST_CASE("benchmarking recovery gates verified against unitary composition") {
  RbConfig cfg;
  cfg.sequence_lengths = {1, 3, 9, 27};
  cfg.sequences_per_length = 25;
  cfg.seed = 99;
  const auto seqs = generate_rb_sequences(cfg);
  REQUIRE(seqs.size() == 100);
  for (const auto& seq : seqs) {
    Su2 u = Su2::identity();
    for (GateLabel g : seq.gates) u = gate_unitary(g) * u;
    u = gate_unitary(seq.recovery) * u;
    if (seq.used_fallback) u = gate_unitary(seq.fallback_second) * u;
    double x, y, z;
    u.bloch_from_ground(x, y, z);
    CHECK(std::abs(z) == Catch::Approx(1.0).margin(1e-9));
    CHECK((seq.target_pole == 1) == (z < 0.0));
  }
}

TEST_CASE("gate durations in drive periods") {
  const auto q = paper_qubit();
  const double tq = q.qubit_period();
  CHECK(gate_duration(GateLabel::Xpi, 352, 2, tq) ==
        Catch::Approx(354.0 * 2.0 * tq));
  CHECK(gate_duration(GateLabel::Xpi, 352, 2, tq) ==
        Catch::Approx(131.8e-9).epsilon(0.005));
  CHECK(gate_duration(GateLabel::I, 352, 2, tq) ==
        Catch::Approx(354.0 * 2.0 * tq));
  // half gates drive for nu/2 periods but occupy the same waveform slot
  CHECK(gate_duration(GateLabel::Ypi2, 352, 2, tq) ==
        Catch::Approx(354.0 * 2.0 * tq));
}

TEST_CASE("noiseless benchmarking stays at unit fidelity") {
  RbConfig cfg;
  cfg.sequence_lengths = {1, 2, 4, 8, 16};
  cfg.sequences_per_length = 10;
  cfg.seed = 3;
  RbNoiseModel none;
  const auto res = run_rb(cfg, none);
  for (double f : res.mean_fidelity)
    CHECK(f == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("depolarizing benchmarking recovers the injected error rate") {
  RbConfig cfg;
  cfg.sequence_lengths = {1, 2, 4, 8, 16, 32, 64};
  cfg.sequences_per_length = 20;
  cfg.seed = 17;
  RbNoiseModel noise;
  noise.kind = RbNoiseModel::Kind::Depolarizing;
  noise.depolarizing_r = 2.1e-2;
  const auto res = run_rb(cfg, noise);
  const auto fit = fit_rb(res.m_values, res.mean_fidelity);
  CHECK(fit.get("r") == Catch::Approx(2.1e-2).epsilon(0.10));

  // oracle: depolarizing commutes with the gates, so after m + 1 noisy gates
  // F = 1/2 + 1/2 (1 - 2r)^(m+1) whenever no fallback recovery fired
  const double p = 1.0 - 2.0 * noise.depolarizing_r;
  for (std::size_t i = 0; i < res.m_values.size(); ++i) {
    const double expect = 0.5 + 0.5 * std::pow(p, res.m_values[i] + 1.0);
    CHECK(res.mean_fidelity[i] == Catch::Approx(expect).margin(5e-3));
  }
}

TEST_CASE("decoherence-limited benchmarking lands in the expected band") {
  RbConfig cfg;
  cfg.sequence_lengths = {1, 2, 4, 8, 16, 32, 64, 100};
  cfg.sequences_per_length = 20;
  cfg.seed = 23;
  RbNoiseModel noise;
  noise.kind = RbNoiseModel::Kind::LindbladChain;
  noise.qubit = paper_qubit();
  const auto res = run_rb(cfg, noise);
  const auto fit = fit_rb(res.m_values, res.mean_fidelity);
  const double r = fit.get("r");
  CHECK(r > 1.5e-3);
  CHECK(r < 3.5e-3);
}
