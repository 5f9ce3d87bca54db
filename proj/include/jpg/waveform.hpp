#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "jpg/constants.hpp"
#include "jpg/rng.hpp"

namespace jpg {

enum class Axis { X, Y, MinusX, MinusY };
enum class GateLabel { I, Xpi, Ypi, Xpi2, Ypi2, MinusXpi, MinusYpi, MinusXpi2, MinusYpi2 };

inline const char* gate_name(GateLabel g) {
  switch (g) {
    case GateLabel::I: return "I";
    case GateLabel::Xpi: return "X_pi";
    case GateLabel::Ypi: return "Y_pi";
    case GateLabel::Xpi2: return "X_pi2";
    case GateLabel::Ypi2: return "Y_pi2";
    case GateLabel::MinusXpi: return "-X_pi";
    case GateLabel::MinusYpi: return "-Y_pi";
    case GateLabel::MinusXpi2: return "-X_pi2";
    case GateLabel::MinusYpi2: return "-Y_pi2";
  }
  return "?";
}

inline GateLabel gate_from_name(const std::string& s) {
  for (GateLabel g : {GateLabel::I, GateLabel::Xpi, GateLabel::Ypi,
                      GateLabel::Xpi2, GateLabel::Ypi2, GateLabel::MinusXpi,
                      GateLabel::MinusYpi, GateLabel::MinusXpi2,
                      GateLabel::MinusYpi2})
    if (s == gate_name(g)) return g;
  throw std::invalid_argument("unknown gate label: " + s);
}

// Drive phase code realizing a rotation axis at subharmonic k. The qubit
// phase advances k times faster than the drive, so a drive offset of
// pi/(2k) delays pulse arrival by a quarter qubit period (the y axis).
inline double phase_for_axis(Axis axis, int k) {
  if (k < 2) throw std::invalid_argument("phase_for_axis: k must be >= 2");
  const double y = kPi / (2.0 * static_cast<double>(k));
  switch (axis) {
    case Axis::X: return 0.0;
    case Axis::Y: return y;
    case Axis::MinusX: return 3.0 * kPi / 2.0;
    case Axis::MinusY: return y + 3.0 * kPi / 2.0;
  }
  throw std::invalid_argument("phase_for_axis: bad axis");
}

struct DriveSegment {
  GateLabel gate;
  int active_periods;      // nu
  double phase_offset;     // radians, in [0, 2 pi)
  int leading_idle_periods;
  int trailing_idle_periods;

  int total_periods() const {
    return active_periods + leading_idle_periods + trailing_idle_periods;
  }
};

// Integer-period sine program. Every segment holds an integer number of
// whole periods, so sample counts are exact by construction.
struct DriveProgram {
  int samples_per_period;
  int subharmonic_k;
  double drive_frequency;  // Hz
  std::vector<DriveSegment> segments;

  double sample_rate() const {
    return static_cast<double>(samples_per_period) * drive_frequency;
  }
  long total_samples() const {
    long n = 0;
    for (const auto& s : segments)
      n += static_cast<long>(s.total_periods()) * samples_per_period;
    return n;
  }
  long active_periods() const {
    long n = 0;
    for (const auto& s : segments) n += s.active_periods;
    return n;
  }

  // Sampled waveform view. Active periods are sin(2 pi n / spp + phase);
  // idle periods are zero.
  std::vector<double> render() const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(total_samples()));
    for (const auto& seg : segments) {
      const long lead = static_cast<long>(seg.leading_idle_periods) * samples_per_period;
      const long active = static_cast<long>(seg.active_periods) * samples_per_period;
      const long trail = static_cast<long>(seg.trailing_idle_periods) * samples_per_period;
      for (long i = 0; i < lead; ++i) out.push_back(0.0);
      for (long i = 0; i < active; ++i)
        out.push_back(std::sin(kTwoPi * static_cast<double>(i) /
                                   static_cast<double>(samples_per_period) -
                               seg.phase_offset));
      for (long i = 0; i < trail; ++i) out.push_back(0.0);
    }
    return out;
  }
};

inline Axis axis_for_gate(GateLabel g) {
  switch (g) {
    case GateLabel::I:
    case GateLabel::Xpi:
    case GateLabel::Xpi2: return Axis::X;
    case GateLabel::Ypi:
    case GateLabel::Ypi2: return Axis::Y;
    case GateLabel::MinusXpi:
    case GateLabel::MinusXpi2: return Axis::MinusX;
    case GateLabel::MinusYpi:
    case GateLabel::MinusYpi2: return Axis::MinusY;
  }
  throw std::invalid_argument("axis_for_gate: bad gate");
}

inline bool is_half_gate(GateLabel g) {
  return g == GateLabel::Xpi2 || g == GateLabel::Ypi2 ||
         g == GateLabel::MinusXpi2 || g == GateLabel::MinusYpi2;
}

// Builds the concatenated drive program for a gate sequence. Pi gates span
// nu_pi + 2 periods (1 leading + 1 trailing idle); pi/2 gates use nu_pi / 2
// active periods and the same idle padding; I idles for the full X_pi length.
// Odd nu_pi requires allow_odd_nu_pi, in which case pi/2 gates floor the
// period count and the residual half pulse is accounted in the budget.
inline DriveProgram build_drive(const std::vector<GateLabel>& gates, int nu_pi,
                                int samples_per_period, int k,
                                double drive_frequency_hz,
                                bool allow_odd_nu_pi = false) {
  if (k < 2) throw std::invalid_argument("build_drive: k must be >= 2");
  if (nu_pi < 1 || samples_per_period < 2)
    throw std::invalid_argument("build_drive: bad nu_pi / samples_per_period");
  const bool any_half = [&] {
    for (GateLabel g : gates)
      if (is_half_gate(g)) return true;
    return false;
  }();
  if (any_half && nu_pi % 2 != 0 && !allow_odd_nu_pi)
    throw std::invalid_argument(
        "build_drive: odd nu_pi with pi/2 gates requires an explicit rounding rule");

  DriveProgram prog;
  prog.samples_per_period = samples_per_period;
  prog.subharmonic_k = k;
  prog.drive_frequency = drive_frequency_hz;
  for (GateLabel g : gates) {
    DriveSegment seg;
    seg.gate = g;
    seg.leading_idle_periods = 1;
    seg.trailing_idle_periods = 1;
    if (g == GateLabel::I) {
      seg.active_periods = 0;
      seg.leading_idle_periods = nu_pi + 1;  // I length equals X_pi length
      seg.trailing_idle_periods = 1;
      seg.phase_offset = 0.0;
    } else {
      seg.active_periods = is_half_gate(g) ? nu_pi / 2 : nu_pi;
      seg.phase_offset = phase_for_axis(axis_for_gate(g), k);
    }
    prog.segments.push_back(seg);
  }
  return prog;
}

inline double pattern_duration(const DriveProgram& prog) {
  if (prog.segments.empty()) return 0.0;
  return static_cast<double>(prog.total_samples()) / prog.sample_rate();
}

struct PulseEvent {
  double time;   // s
  double sigma;  // s
  double area;   // V s
};

struct PulseTrain {
  std::vector<PulseEvent> events;  // strictly increasing times
  double drive_frequency = 0.0;    // Hz
};

// Equally spaced Gaussian events at 1/f_d intervals. `area` is the uniform
// per-pulse area in V s (normalized downstream to a per-pulse tip angle).
inline PulseTrain build_pulse_train(int n_pulses, double sigma_s,
                                    double drive_frequency_hz,
                                    double start_phase_rad = 0.0,
                                    double area = 1.0) {
  if (n_pulses < 0) throw std::invalid_argument("build_pulse_train: n_pulses < 0");
  PulseTrain train;
  train.drive_frequency = drive_frequency_hz;
  const double period = 1.0 / drive_frequency_hz;
  const double t0 = start_phase_rad / kTwoPi * period;
  train.events.reserve(static_cast<std::size_t>(n_pulses));
  for (int i = 0; i < n_pulses; ++i)
    train.events.push_back({t0 + static_cast<double>(i) * period, sigma_s, area});
  return train;
}

enum class JitterMode { PerJunction, Drive };

struct JitterModel {
  JitterMode mode = JitterMode::Drive;
  double sigma_jitter = 0.0;  // s
  int n_junctions = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (sigma_jitter < 0.0)
      throw std::invalid_argument("JitterModel: sigma_jitter must be >= 0");
    if (n_junctions < 1)
      throw std::invalid_argument("JitterModel: n_junctions must be >= 1");
  }
};

// Drive mode: each pulse arrival shifts by a Gaussian clock draw (correlated
// across the array, one draw per pulse). Per-junction mode: independent
// junction jitter broadens each pulse to sqrt(sigma^2 + sigma_j^2) and moves
// the arrival by the central-limit residual sigma_j / sqrt(N).
inline PulseTrain apply_jitter(const PulseTrain& train, const JitterModel& model) {
  model.validate();
  if (model.sigma_jitter == 0.0) return train;
  auto rng = make_stream(model.seed, 0);
  std::normal_distribution<double> unit(0.0, 1.0);
  PulseTrain out = train;
  if (model.mode == JitterMode::Drive) {
    for (auto& ev : out.events) ev.time += model.sigma_jitter * unit(rng);
  } else {
    const double shift_sigma =
        model.sigma_jitter / std::sqrt(static_cast<double>(model.n_junctions));
    for (auto& ev : out.events) {
      ev.time += shift_sigma * unit(rng);
      ev.sigma = std::sqrt(ev.sigma * ev.sigma +
                           model.sigma_jitter * model.sigma_jitter);
    }
  }
  return out;
}

}  // namespace jpg
