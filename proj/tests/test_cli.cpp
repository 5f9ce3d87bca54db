#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>
#include <sys/wait.h>

#include "jpg/io.hpp"

namespace fs = std::filesystem;

namespace {

std::string binary_path() {
  const char* bin = std::getenv("JPGSIM_BIN");
  REQUIRE(bin != nullptr);
  return bin;
}

fs::path scratch_dir() {
  static const fs::path root =
      fs::temp_directory_path() / ("jpgsim_test_" + std::to_string(::getpid()));
  fs::create_directories(root);
  return root;
}

int run_cli(const std::string& args) {
  const std::string cmd = binary_path() + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

fs::path write_config(const std::string& name, const nlohmann::json& j) {
  const fs::path p = scratch_dir() / name;
  std::ofstream out(p);
  out << j.dump(2);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

nlohmann::json slurp_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_CASE("pulse command emits trace, fits and a checksummed manifest") {
  const auto cfg = write_config(
      "pulse.json", {{"experiment", {{"periods", 30.0}}}, {"seed", 7}});
  const fs::path out = scratch_dir() / "pulse_out";
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + out.string() +
                  " rsj-pulse") == 0);

  REQUIRE(fs::exists(out / "rsj_trace.csv"));
  REQUIRE(fs::exists(out / "pulse_fits.json"));
  REQUIRE(fs::exists(out / "manifest.json"));

  // every manifest entry checksums the actual file bytes
  const auto manifest = slurp_json(out / "manifest.json");
  CHECK(manifest.at("command") == "rsj-pulse");
  CHECK(manifest.at("seed") == 7);
  CHECK(manifest.at("wall_seconds").get<double>() > 0.0);
  REQUIRE(manifest.at("files").size() >= 2);
  for (const auto& f : manifest.at("files")) {
    const std::string name = f.at("name");
    CHECK(jpg::fnv1a64(slurp(out / name)) == f.at("fnv1a64").get<std::uint64_t>());
  }

  // locked single-flux-quantum output: unit pulse area, sigma/tau ~ 1.08/2pi
  const auto fits = slurp_json(out / "pulse_fits.json");
  REQUIRE(fits.at("n_pulses").get<int>() >= 10);
  for (const auto& p : fits.at("pulses")) {
    CHECK(p.at("area_Phi0").get<double>() == Catch::Approx(1.0).margin(0.02));
    CHECK(p.at("sigma_over_tau").get<double>() ==
          Catch::Approx(1.08 / (2.0 * 3.14159265358979)).epsilon(0.10));
  }
}

TEST_CASE("payloads are byte-identical across re-runs") {
  const auto cfg = write_config(
      "det.json", {{"experiment", {{"n_shots", 2000}}}, {"seed", 11}});
  const fs::path a = scratch_dir() / "det_a";
  const fs::path b = scratch_dir() / "det_b";
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + a.string() + " readout") == 0);
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + b.string() + " readout") == 0);

  for (const auto& entry : fs::directory_iterator(a)) {
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json") continue;
    CHECK(slurp(entry.path()) == slurp(b / name));
  }
  // manifests agree except for the wall time
  auto ma = slurp_json(a / "manifest.json");
  auto mb = slurp_json(b / "manifest.json");
  ma.erase("wall_seconds");
  mb.erase("wall_seconds");
  CHECK(ma == mb);
}

TEST_CASE("seed changes the sampled payloads") {
  const auto cfg = write_config("seeded.json",
                                {{"experiment", {{"n_shots", 2000}}}});
  const fs::path a = scratch_dir() / "seed_1";
  const fs::path b = scratch_dir() / "seed_2";
  REQUIRE(run_cli("--config " + cfg.string() + " --seed 1 --out " + a.string() +
                  " readout") == 0);
  REQUIRE(run_cli("--config " + cfg.string() + " --seed 2 --out " + b.string() +
                  " readout") == 0);
  CHECK(slurp(a / "single_shots.csv") != slurp(b / "single_shots.csv"));
}

TEST_CASE("configuration errors exit with code 2") {
  const fs::path out = scratch_dir() / "err_out";

  const auto unknown = write_config("unknown.json", {{"not_a_key", 1}});
  CHECK(run_cli("--config " + unknown.string() + " --out " + out.string() +
                " rsj-pulse") == 2);

  const auto unknown_exp = write_config(
      "unknown_exp.json", {{"experiment", {{"bogus_setting", 1}}}});
  CHECK(run_cli("--config " + unknown_exp.string() + " --out " + out.string() +
                " rsj-pulse") == 2);

  const fs::path malformed = scratch_dir() / "malformed.json";
  std::ofstream(malformed) << "{ not json";
  CHECK(run_cli("--config " + malformed.string() + " --out " + out.string() +
                " rsj-pulse") == 2);

  const auto inverted = write_config(
      "inverted.json", {{"experiment", {{"i_min", 0.9}, {"i_max", 0.5}}}});
  CHECK(run_cli("--config " + inverted.string() + " --out " + out.string() + " iv") == 2);

  const auto empty_sigmas = write_config(
      "empty_sigmas.json", {{"experiment", {{"sigmas", nlohmann::json::array()}}}});
  CHECK(run_cli("--config " + empty_sigmas.string() + " --out " + out.string() +
                " gate-sweep") == 2);

  const auto bad_qubit = write_config("bad_qubit.json", {{"qubit", {{"T1", -1.0}}}});
  CHECK(run_cli("--config " + bad_qubit.string() + " --out " + out.string() +
                " rsj-pulse") == 2);

  CHECK(run_cli("--threads 0 --out " + out.string() + " rsj-pulse") == 2);
  CHECK(run_cli("--config " + (scratch_dir() / "nope.json").string() + " --out " +
                out.string() + " rsj-pulse") == 2);
}

TEST_CASE("analysis failures exit with code 3") {
  // a Rabi grid far shorter than the pi time has no oscillation to fit
  const auto cfg = write_config(
      "flat.json",
      {{"experiment", {{"single_bias", true}, {"nu_max", 16.0}, {"nu_step", 2.0}}}});
  const fs::path out = scratch_dir() / "flat_out";
  CHECK(run_cli("--config " + cfg.string() + " --out " + out.string() + " rabi") == 3);
}

TEST_CASE("calibrated Rabi curve recovers the configured pi time") {
  const auto cfg = write_config(
      "rabi1d.json",
      {{"experiment", {{"single_bias", true}, {"nu_max", 704.0}, {"nu_step", 8.0}}}});
  const fs::path out = scratch_dir() / "rabi_out";
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + out.string() + " rabi") == 0);
  const auto fit = slurp_json(out / "rabi_fit.json");
  CHECK(fit.at("nu_pi").get<double>() == Catch::Approx(352.0).margin(1.0));
  CHECK(fs::exists(out / "rabi_curve.csv"));
}

TEST_CASE("ideal budget is zero and the power report is emitted") {
  const auto cfg = write_config("budget.json",
                                {{"experiment", {{"ideal", true}}}});
  const fs::path out = scratch_dir() / "budget_out";
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + out.string() + " budget") == 0);
  const auto budget = slurp_json(out / "budget.json");
  CHECK(budget.at("total").get<double>() == 0.0);
  CHECK(budget.at("digitization").at("method") == "analytic");
  const auto power = slurp_json(out / "power.json");
  CHECK(power.at("on_chip_power_W").get<double>() ==
        Catch::Approx(1.6e-6).margin(0.1e-6));
  CHECK(power.at("stage_dissipation_W").size() == 4);
}

TEST_CASE("output directory falls back to the environment variable") {
  const fs::path out = scratch_dir() / "env_out";
  const std::string cmd = "JPGSIM_OUT=" + out.string() + " " + binary_path() +
                          " budget >/dev/null 2>&1";
  // no --out and no config output_dir: the env var decides
  const auto cfgless = write_config("envrun.json", {{"experiment", {{"ideal", true}}}});
  const std::string full = "JPGSIM_OUT=" + out.string() + " " + binary_path() +
                           " --config " + cfgless.string() +
                           " budget >/dev/null 2>&1";
  (void)cmd;
  const int rc = std::system(full.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  CHECK(WEXITSTATUS(rc) == 0);
  CHECK(fs::exists(out / "manifest.json"));
}
