#pragma once

// CSV/JSON emission and the per-run result manifest.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace jpg {

// 64-bit FNV-1a over raw bytes; used for output checksums.
inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Shortest round-trip decimal representation so output is byte-stable across
// runs and platforms.
inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  std::string full = os.str();
  for (int prec = 1; prec < 17; ++prec) {
    std::ostringstream trial;
    trial.precision(prec);
    trial << v;
    if (std::stod(trial.str()) == v) return trial.str();
  }
  return full;
}

struct CsvTable {
  std::vector<std::string> columns;  // header cells, units included in the name
  std::vector<std::vector<double>> rows;

  std::string render() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) os << ',';
      os << columns[i];
    }
    os << '\n';
    for (const auto& row : rows) {
      if (row.size() != columns.size())
        throw std::invalid_argument("CsvTable: row width mismatch");
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        os << format_double(row[i]);
      }
      os << '\n';
    }
    return os.str();
  }
};

struct ResultManifest {
  std::string command;
  std::string version = "1.0.0";
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  double wall_seconds = 0.0;
  nlohmann::json config_echo;
  std::vector<std::pair<std::string, std::uint64_t>> files;  // name, checksum

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["version"] = version;
    j["seed"] = seed;
    j["config_hash"] = config_hash;
    j["wall_seconds"] = wall_seconds;
    j["config"] = config_echo;
    j["files"] = nlohmann::json::array();
    for (const auto& [name, sum] : files) {
      j["files"].push_back({{"name", name}, {"fnv1a64", sum}});
    }
    return j;
  }
};

// Writes payload files through the manifest so every emitted file is listed
// with its checksum.
class OutputWriter {
 public:
  OutputWriter(std::filesystem::path dir, std::string command, std::uint64_t seed)
      : dir_(std::move(dir)), started_(std::chrono::steady_clock::now()) {
    manifest_.command = std::move(command);
    manifest_.seed = seed;
    std::filesystem::create_directories(dir_);
  }

  void write_text(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + (dir_ / name).string());
    out << content;
    manifest_.files.emplace_back(name, fnv1a64(content));
  }

  void write_csv(const std::string& name, const CsvTable& table) {
    write_text(name, table.render());
  }

  void write_json(const std::string& name, const nlohmann::json& j) {
    write_text(name, j.dump(2) + "\n");
  }

  ResultManifest& manifest() { return manifest_; }

  void finalize() {
    manifest_.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest");
    out << manifest_.to_json().dump(2) << "\n";
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::chrono::steady_clock::time_point started_;
  ResultManifest manifest_;
};

}  // namespace jpg
