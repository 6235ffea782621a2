#include "omnisal/audio/resample.hpp"

#include <cmath>
#include <numeric>

namespace omnisal::audio {

namespace {

constexpr double kKaiserBeta = 8.6;
constexpr int kTapsPerPhase = 32;

double bessel_i0(double x) {
  // Power series; converges quickly for the beta values used here.
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

double kaiser(double u) {  // u in [-1, 1]
  const double t = 1.0 - u * u;
  if (t <= 0.0) return 0.0;
  return bessel_i0(kKaiserBeta * std::sqrt(t)) / bessel_i0(kKaiserBeta);
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = 3.14159265358979323846 * x;
  return std::sin(px) / px;
}

}  // namespace

MonoClip resample(const MonoClip& clip, double target_rate) {
  if (target_rate <= 0.0) throw DataError("resample: target rate must be positive");
  if (clip.sample_rate <= 0.0) throw DataError("resample: source rate must be positive");
  if (clip.sample_rate == target_rate) return clip;

  const long long in_rate = std::llround(clip.sample_rate);
  const long long out_rate = std::llround(target_rate);
  if (static_cast<double>(in_rate) != clip.sample_rate ||
      static_cast<double>(out_rate) != target_rate) {
    throw DataError("resample: rates must be integral for rational resampling");
  }
  const long long g = std::gcd(in_rate, out_rate);
  const long long up = out_rate / g;    // L
  const long long down = in_rate / g;   // M

  // Anti-alias cutoff at the lower of the two Nyquist rates, in units of
  // input samples. Half-width grows by 1/fc when downsampling so the number
  // of taps under the kernel stays at kTapsPerPhase.
  const double fc = std::min(1.0, static_cast<double>(out_rate) / static_cast<double>(in_rate));
  const double half_width = (kTapsPerPhase / 2.0) / fc;

  const std::size_t n_in = clip.samples.size();
  const std::size_t n_out = static_cast<std::size_t>(
      (static_cast<unsigned long long>(n_in) * up + down - 1) / down);
  MonoClip out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);

  for (std::size_t n = 0; n < n_out; ++n) {
    // Output time in input samples, kept rational: t = n * M / L.
    const long long num = static_cast<long long>(n) * down;
    const double t = static_cast<double>(num) / static_cast<double>(up);
    const long long m_lo = static_cast<long long>(std::ceil(t - half_width));
    const long long m_hi = static_cast<long long>(std::floor(t + half_width));
    double acc = 0.0, wsum = 0.0;
    for (long long m = m_lo; m <= m_hi; ++m) {
      const double tau = t - static_cast<double>(m);
      const double w = fc * sinc(fc * tau) * kaiser(tau / half_width);
      wsum += w;
      if (m >= 0 && m < static_cast<long long>(n_in)) {
        acc += w * clip.samples[static_cast<std::size_t>(m)];
      }
    }
    out.samples[n] = wsum != 0.0 ? acc / wsum : 0.0;
  }
  return out;
}

}  // namespace omnisal::audio
