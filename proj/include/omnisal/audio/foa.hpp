#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "omnisal/common/error.hpp"
#include "omnisal/geometry/layout.hpp"
#include "omnisal/geometry/spherical.hpp"

namespace omnisal::audio {

struct MonoClip {
  std::vector<double> samples;
  double sample_rate = 0.0;

  double duration() const {
    return sample_rate > 0.0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// First-order ambisonics, channel order (W, Y, Z, X). W carries a 1/sqrt(2)
// gain at encode time; X/Y/Z are the Cartesian direction gains of the source.
struct FoaClip {
  std::array<std::vector<double>, 4> channels;  // W, Y, Z, X
  double sample_rate = 0.0;

  std::size_t length() const { return channels[0].size(); }
  std::vector<double>& w() { return channels[0]; }
  std::vector<double>& y() { return channels[1]; }
  std::vector<double>& z() { return channels[2]; }
  std::vector<double>& x() { return channels[3]; }
  const std::vector<double>& w() const { return channels[0]; }
  const std::vector<double>& y() const { return channels[1]; }
  const std::vector<double>& z() const { return channels[2]; }
  const std::vector<double>& x() const { return channels[3]; }

  void validate() const {
    if (sample_rate <= 0.0) throw DataError("FoaClip: sample rate must be positive");
    for (int c = 1; c < 4; ++c) {
      if (channels[c].size() != channels[0].size()) {
        throw DataError("FoaClip: channels must have equal length");
      }
    }
  }
};

using Mat3 = std::array<double, 9>;  // row-major

// Euler factors acting on Cartesian (x, y, z): yaw about +z (counterclockwise
// seen from above), pitch raising +x toward +z, roll about +x.
Mat3 rotation_yaw(double a);
Mat3 rotation_pitch(double b);
Mat3 rotation_roll(double c);
Mat3 mat3_mul(const Mat3& a, const Mat3& b);

// R = R_roll * R_pitch * R_yaw.
Mat3 foa_rotation(double yaw, double pitch, double roll);

// Point sources mixed into B-format:
//   W = sum s/sqrt(2),  X = sum s cos(lat) cos(lon),
//   Y = sum s cos(lat) sin(lon),  Z = sum s sin(lat).
FoaClip encode_sources(const std::vector<std::pair<MonoClip, geom::SphericalCoord>>& sources);

// Sound-field rotation: W untouched, (X, Y, Z) rotated as a vector.
FoaClip rotate_foa(const FoaClip& foa, double yaw, double pitch, double roll);
FoaClip rotate_foa_matrix(const FoaClip& foa, const Mat3& rotation);

// Forward-facing decode: F[n] = (sqrt(2) W[n] + X[n]) * 2.
MonoClip decode_forward(const FoaClip& foa);

// Per-viewport mono waveforms: yaw by -lon then pitch by -lat brings the
// viewport direction to +X, then decode.
std::vector<MonoClip> viewport_waveforms(const FoaClip& foa, const geom::ViewportLayout& layout);

}  // namespace omnisal::audio
