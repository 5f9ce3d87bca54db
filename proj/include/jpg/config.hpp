#pragma once

// Run configuration: JSON schema validation and typed access.

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jpg/io.hpp"
#include "jpg/jj_core.hpp"
#include "jpg/qubit_sim.hpp"

namespace jpg {

// Bad or missing configuration; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace cfgdetail {

inline void require_object(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
}

inline void reject_unknown(const nlohmann::json& j, const std::string& path,
                           const std::set<std::string>& allowed) {
  require_object(j, path);
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) throw ConfigError(path + "." + key + ": unknown key");
  }
}

inline double get_number(const nlohmann::json& j, const std::string& path,
                         const std::string& key, double fallback,
                         bool required = false) {
  if (!j.contains(key)) {
    if (required) throw ConfigError(path + "." + key + ": missing");
    return fallback;
  }
  if (!j.at(key).is_number()) throw ConfigError(path + "." + key + ": expected a number");
  return j.at(key).get<double>();
}

inline double get_positive(const nlohmann::json& j, const std::string& path,
                           const std::string& key, double fallback,
                           bool required = false) {
  const double v = get_number(j, path, key, fallback, required);
  if (v <= 0.0) throw ConfigError(path + "." + key + ": must be positive");
  return v;
}

inline int get_int(const nlohmann::json& j, const std::string& path,
                   const std::string& key, int fallback, int min_value) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer())
    throw ConfigError(path + "." + key + ": expected an integer");
  const int v = j.at(key).get<int>();
  if (v < min_value)
    throw ConfigError(path + "." + key + ": must be >= " + std::to_string(min_value));
  return v;
}

inline std::vector<double> get_array(const nlohmann::json& j, const std::string& path,
                                     const std::string& key) {
  if (!j.contains(key)) return {};
  if (!j.at(key).is_array()) throw ConfigError(path + "." + key + ": expected an array");
  std::vector<double> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) throw ConfigError(path + "." + key + ": expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace cfgdetail

struct DriveConfig {
  int k = 2;
  int samples_per_period = 24;
  double frequency = 2.685e9;  // Hz
  int nu_pi = 352;
  double sigma_over_Tq = 0.19;
  double i_ac = 0.6;
};

struct RunConfig {
  JunctionArrayParams device{3.05e-3, 6.93e-3, 4650, 0.01};
  QubitModel qubit;
  DriveConfig drive;
  nlohmann::json experiment = nlohmann::json::object();
  std::uint64_t seed = 1;
  std::string output_dir;  // empty -> --out, JPGSIM_OUT, then "out"
  int threads = 1;
  nlohmann::json raw;  // echoed into the manifest

  std::uint64_t hash() const { return fnv1a64(raw.dump()); }
};

// Parses and validates a config document. Unknown keys anywhere outside the
// command-owned experiment section are rejected; the experiment section is
// validated by each command. T1 or Tphi of 0 disables that decay channel.
inline RunConfig parse_config(const nlohmann::json& j) {
  using namespace cfgdetail;
  reject_unknown(j, "config",
                 {"device", "qubit", "drive", "experiment", "seed", "output_dir", "threads"});
  RunConfig cfg;
  cfg.raw = j;

  if (j.contains("device")) {
    const auto& d = j.at("device");
    reject_unknown(d, "device",
                   {"critical_current", "normal_resistance", "n_junctions", "beta_c"});
    cfg.device.critical_current =
        get_positive(d, "device", "critical_current", cfg.device.critical_current);
    cfg.device.normal_resistance =
        get_positive(d, "device", "normal_resistance", cfg.device.normal_resistance);
    cfg.device.n_junctions = get_int(d, "device", "n_junctions", cfg.device.n_junctions, 1);
    cfg.device.beta_c = get_positive(d, "device", "beta_c", cfg.device.beta_c);
  }

  cfg.qubit.omega_10 = kTwoPi * 5.37e9;
  cfg.qubit.T1 = 34e-6;
  cfg.qubit.Tphi = 68e-6;
  if (j.contains("qubit")) {
    const auto& q = j.at("qubit");
    reject_unknown(q, "qubit", {"frequency", "T1", "Tphi", "anharmonicity", "levels"});
    cfg.qubit.omega_10 = kTwoPi * get_positive(q, "qubit", "frequency", 5.37e9);
    const double t1 = get_number(q, "qubit", "T1", cfg.qubit.T1);
    const double tphi = get_number(q, "qubit", "Tphi", cfg.qubit.Tphi);
    if (t1 < 0.0) throw ConfigError("qubit.T1: must be >= 0 (0 disables relaxation)");
    if (tphi < 0.0) throw ConfigError("qubit.Tphi: must be >= 0 (0 disables dephasing)");
    cfg.qubit.T1 = t1 == 0.0 ? std::numeric_limits<double>::infinity() : t1;
    cfg.qubit.Tphi = tphi == 0.0 ? std::numeric_limits<double>::infinity() : tphi;
    cfg.qubit.anharmonicity = get_positive(q, "qubit", "anharmonicity", 0.05);
    cfg.qubit.levels = get_int(q, "qubit", "levels", 2, 2);
    if (cfg.qubit.levels > 3) throw ConfigError("qubit.levels: must be 2 or 3");
  }

  if (j.contains("drive")) {
    const auto& d = j.at("drive");
    reject_unknown(d, "drive",
                   {"k", "samples_per_period", "frequency", "nu_pi", "sigma_over_Tq", "i_ac"});
    cfg.drive.k = get_int(d, "drive", "k", cfg.drive.k, 1);
    cfg.drive.samples_per_period =
        get_int(d, "drive", "samples_per_period", cfg.drive.samples_per_period, 2);
    cfg.drive.frequency = get_positive(d, "drive", "frequency", cfg.drive.frequency);
    cfg.drive.nu_pi = get_int(d, "drive", "nu_pi", cfg.drive.nu_pi, 1);
    cfg.drive.sigma_over_Tq = get_positive(d, "drive", "sigma_over_Tq", cfg.drive.sigma_over_Tq);
    cfg.drive.i_ac = get_positive(d, "drive", "i_ac", cfg.drive.i_ac);
  }

  if (j.contains("experiment")) {
    require_object(j.at("experiment"), "experiment");
    cfg.experiment = j.at("experiment");
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
      throw ConfigError("seed: expected an unsigned integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) throw ConfigError("output_dir: expected a string");
    cfg.output_dir = j.at("output_dir").get<std::string>();
  }
  cfg.threads = cfgdetail::get_int(j, "config", "threads", 1, 1);

  cfg.device.validate();
  cfg.qubit.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(j);
}

}  // namespace jpg
