#include "omnisal/audio/foa.hpp"

#include <cmath>

namespace omnisal::audio {

Mat3 rotation_yaw(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0};
}

Mat3 rotation_pitch(double b) {
  const double c = std::cos(b), s = std::sin(b);
  return {c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c};
}

Mat3 rotation_roll(double g) {
  const double c = std::cos(g), s = std::sin(g);
  return {1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c};
}

Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
  Mat3 out{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += a[i * 3 + k] * b[k * 3 + j];
      out[i * 3 + j] = acc;
    }
  }
  return out;
}

Mat3 foa_rotation(double yaw, double pitch, double roll) {
  return mat3_mul(rotation_roll(roll), mat3_mul(rotation_pitch(pitch), rotation_yaw(yaw)));
}

FoaClip encode_sources(const std::vector<std::pair<MonoClip, geom::SphericalCoord>>& sources) {
  FoaClip foa;
  if (sources.empty()) {
    foa.sample_rate = 48000.0;
    return foa;
  }
  const double rate = sources[0].first.sample_rate;
  const std::size_t n = sources[0].first.samples.size();
  for (const auto& [clip, dir] : sources) {
    if (clip.sample_rate != rate) throw DataError("encode_sources: mixed sample rates");
    if (clip.samples.size() != n) throw DataError("encode_sources: mixed lengths");
  }
  foa.sample_rate = rate;
  for (auto& ch : foa.channels) ch.assign(n, 0.0);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (const auto& [clip, dir] : sources) {
    const double gx = std::cos(dir.lat) * std::cos(dir.lon);
    const double gy = std::cos(dir.lat) * std::sin(dir.lon);
    const double gz = std::sin(dir.lat);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = clip.samples[i];
      foa.w()[i] += s * inv_sqrt2;
      foa.y()[i] += s * gy;
      foa.z()[i] += s * gz;
      foa.x()[i] += s * gx;
    }
  }
  return foa;
}

FoaClip rotate_foa_matrix(const FoaClip& foa, const Mat3& r) {
  foa.validate();
  FoaClip out;
  out.sample_rate = foa.sample_rate;
  const std::size_t n = foa.length();
  out.w() = foa.w();  // zeroth harmonic is rotation invariant
  out.y().resize(n);
  out.z().resize(n);
  out.x().resize(n);
  const auto& fx = foa.x();
  const auto& fy = foa.y();
  const auto& fz = foa.z();
  for (std::size_t i = 0; i < n; ++i) {
    out.x()[i] = r[0] * fx[i] + r[1] * fy[i] + r[2] * fz[i];
    out.y()[i] = r[3] * fx[i] + r[4] * fy[i] + r[5] * fz[i];
    out.z()[i] = r[6] * fx[i] + r[7] * fy[i] + r[8] * fz[i];
  }
  return out;
}

FoaClip rotate_foa(const FoaClip& foa, double yaw, double pitch, double roll) {
  return rotate_foa_matrix(foa, foa_rotation(yaw, pitch, roll));
}

MonoClip decode_forward(const FoaClip& foa) {
  foa.validate();
  MonoClip out;
  out.sample_rate = foa.sample_rate;
  out.samples.resize(foa.length());
  const double sqrt2 = std::sqrt(2.0);
  for (std::size_t i = 0; i < foa.length(); ++i) {
    out.samples[i] = (sqrt2 * foa.w()[i] + foa.x()[i]) * 2.0;
  }
  return out;
}

std::vector<MonoClip> viewport_waveforms(const FoaClip& foa, const geom::ViewportLayout& layout) {
  foa.validate();
  std::vector<MonoClip> out;
  out.reserve(layout.count());
  for (const auto& center : layout.centers) {
    out.push_back(decode_forward(rotate_foa(foa, -center.lon, -center.lat, 0.0)));
  }
  return out;
}

}  // namespace omnisal::audio
