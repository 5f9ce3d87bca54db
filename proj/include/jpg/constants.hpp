#pragma once

namespace jpg {

// CODATA values, SI units.
inline constexpr double kPhi0 = 2.067833848e-15;   // magnetic flux quantum, Wb
inline constexpr double kHbar = 1.054571817e-34;   // J s
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

}  // namespace jpg
