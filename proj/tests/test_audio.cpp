#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "omnisal/audio/foa.hpp"
#include "omnisal/audio/mel.hpp"
#include "omnisal/audio/resample.hpp"
#include "omnisal/audio/wav_io.hpp"
#include "omnisal/common/rng.hpp"
#include "omnisal/geometry/layout.hpp"

using namespace omnisal;
using namespace omnisal::audio;
using geom::SphericalCoord;
using geom::deg_to_rad;
using geom::kPi;

namespace {

MonoClip tone(double freq, double rate, double seconds, double amp = 0.5) {
  MonoClip clip;
  clip.sample_rate = rate;
  const std::size_t n = static_cast<std::size_t>(rate * seconds);
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    clip.samples[i] = amp * std::sin(2.0 * kPi * freq * static_cast<double>(i) / rate);
  }
  return clip;
}

MonoClip noise_clip(Rng& rng, double rate, std::size_t n) {
  MonoClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(n);
  for (auto& s : clip.samples) s = uniform(rng, -0.5, 0.5);
  return clip;
}

double rms(const MonoClip& c) {
  double acc = 0.0;
  for (double s : c.samples) acc += s * s;
  return std::sqrt(acc / static_cast<double>(c.samples.size()));
}

SphericalCoord random_direction(Rng& rng) {
  return {std::asin(uniform(rng, -1.0, 1.0)), uniform(rng, -kPi, kPi)};
}

}  // namespace

TEST_CASE("encoding a unit source at the front: W = s/sqrt(2), X = s, Y = Z = 0") {
  Rng rng(1);
  const MonoClip s = noise_clip(rng, 48000.0, 64);
  const FoaClip foa = encode_sources({{s, {0.0, 0.0}}});
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    CHECK(foa.w()[i] == doctest::Approx(s.samples[i] / std::sqrt(2.0)).epsilon(1e-14));
    CHECK(foa.x()[i] == doctest::Approx(s.samples[i]).epsilon(1e-14));
    CHECK(foa.y()[i] == 0.0);
    CHECK(foa.z()[i] == 0.0);
  }
}

TEST_CASE("encoding an empty source list gives a silent clip") {
  const FoaClip foa = encode_sources({});
  CHECK(foa.length() == 0);
}

TEST_CASE("two equal antipodal sources cancel in X/Y/Z and add in W") {
  Rng rng(2);
  const MonoClip s = noise_clip(rng, 48000.0, 128);
  const SphericalCoord d{0.4, 1.1};
  const SphericalCoord anti{-d.lat, geom::wrap_lon(d.lon + kPi)};
  const FoaClip foa = encode_sources({{s, d}, {s, anti}});
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    CHECK(std::abs(foa.x()[i]) < 1e-12);
    CHECK(std::abs(foa.y()[i]) < 1e-12);
    CHECK(std::abs(foa.z()[i]) < 1e-12);
    CHECK(foa.w()[i] == doctest::Approx(2.0 * s.samples[i] / std::sqrt(2.0)).epsilon(1e-13));
  }
}

TEST_CASE("identity rotation is bitwise identity; W never changes") {
  Rng rng(3);
  const FoaClip foa = encode_sources({{noise_clip(rng, 48000.0, 256), {0.3, -0.7}}});
  const FoaClip same = rotate_foa(foa, 0.0, 0.0, 0.0);
  for (int c = 0; c < 4; ++c) CHECK(same.channels[c] == foa.channels[c]);

  for (int k = 0; k < 10; ++k) {
    const FoaClip rot = rotate_foa(foa, uniform(rng, -kPi, kPi), uniform(rng, -1.5, 1.5),
                                   uniform(rng, -kPi, kPi));
    CHECK(rot.w() == foa.w());
  }
}

TEST_CASE("yaw -90 deg on a source at lon 90 equals encoding at lon 0") {
  Rng rng(4);
  const MonoClip s = noise_clip(rng, 48000.0, 200);
  const FoaClip at90 = encode_sources({{s, {0.0, deg_to_rad(90.0)}}});
  const FoaClip rotated = rotate_foa(at90, deg_to_rad(-90.0), 0.0, 0.0);
  const FoaClip at0 = encode_sources({{s, {0.0, 0.0}}});
  for (int c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
      CHECK(rotated.channels[c][i] == doctest::Approx(at0.channels[c][i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("rotation is a group action: composed rotations match the matrix product") {
  Rng rng(5);
  const FoaClip foa = encode_sources({{noise_clip(rng, 48000.0, 64), {0.2, 0.9}},
                                      {noise_clip(rng, 48000.0, 64), {-0.8, -2.1}}});
  for (int k = 0; k < 100; ++k) {
    const double y1 = uniform(rng, -kPi, kPi), p1 = uniform(rng, -1.5, 1.5), r1 = uniform(rng, -kPi, kPi);
    const double y2 = uniform(rng, -kPi, kPi), p2 = uniform(rng, -1.5, 1.5), r2 = uniform(rng, -kPi, kPi);
    const FoaClip chained = rotate_foa(rotate_foa(foa, y1, p1, r1), y2, p2, r2);
    const Mat3 composed = mat3_mul(foa_rotation(y2, p2, r2), foa_rotation(y1, p1, r1));
    const FoaClip direct = rotate_foa_matrix(foa, composed);
    for (int c = 0; c < 4; ++c) {
      for (std::size_t i = 0; i < foa.length(); ++i) {
        CHECK(chained.channels[c][i] == doctest::Approx(direct.channels[c][i]).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("per-sample channel energy is invariant under rotation") {
  Rng rng(6);
  const FoaClip foa = encode_sources({{noise_clip(rng, 48000.0, 128), {0.5, 0.3}},
                                      {noise_clip(rng, 48000.0, 128), {-0.2, 2.5}}});
  for (int k = 0; k < 20; ++k) {
    const FoaClip rot = rotate_foa(foa, uniform(rng, -kPi, kPi), uniform(rng, -1.5, 1.5),
                                   uniform(rng, -kPi, kPi));
    for (std::size_t i = 0; i < foa.length(); ++i) {
      double e0 = 0.0, e1 = 0.0;
      for (int c = 0; c < 4; ++c) {
        e0 += foa.channels[c][i] * foa.channels[c][i];
        e1 += rot.channels[c][i] * rot.channels[c][i];
      }
      CHECK(e1 == doctest::Approx(e0).epsilon(1e-9));
    }
  }
}

TEST_CASE("decode of constant W = X = 1 gives 2(sqrt(2) + 1)") {
  FoaClip foa;
  foa.sample_rate = 48000.0;
  foa.w().assign(16, 1.0);
  foa.x().assign(16, 1.0);
  foa.y().assign(16, -0.3);
  foa.z().assign(16, 0.7);
  const MonoClip out = decode_forward(foa);
  for (double v : out.samples) {
    CHECK(v == doctest::Approx(2.0 * (std::sqrt(2.0) + 1.0)).epsilon(1e-14));
  }
}

TEST_CASE("decode of silence is silence; front gives 4s, back gives 0") {
  FoaClip silent;
  silent.sample_rate = 32000.0;
  for (auto& ch : silent.channels) ch.assign(32, 0.0);
  for (double v : decode_forward(silent).samples) CHECK(v == 0.0);

  Rng rng(7);
  const MonoClip s = noise_clip(rng, 48000.0, 100);
  const MonoClip front = decode_forward(encode_sources({{s, {0.0, 0.0}}}));
  const MonoClip back = decode_forward(encode_sources({{s, {0.0, kPi - 1e-12}}}));
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    CHECK(front.samples[i] == doctest::Approx(4.0 * s.samples[i]).epsilon(1e-12));
    CHECK(std::abs(back.samples[i]) < 1e-9);
  }
}

TEST_CASE("decode follows the 2(1 + cos gamma) law for 50 random directions") {
  Rng rng(8);
  const MonoClip s = noise_clip(rng, 48000.0, 64);
  for (int k = 0; k < 50; ++k) {
    const SphericalCoord d = random_direction(rng);
    const double cos_gamma = std::cos(d.lat) * std::cos(d.lon);  // angle to +X
    const MonoClip out = decode_forward(encode_sources({{s, d}}));
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
      CHECK(out.samples[i] ==
            doctest::Approx(2.0 * (1.0 + cos_gamma) * s.samples[i]).epsilon(1e-9).scale(1.0));
    }
    // Same law after an arbitrary rotation of the sound field.
    const double yaw = uniform(rng, -kPi, kPi), pitch = uniform(rng, -1.5, 1.5);
    const FoaClip rot = rotate_foa(encode_sources({{s, d}}), yaw, pitch, 0.0);
    const Mat3 r = foa_rotation(yaw, pitch, 0.0);
    const geom::Vec3 u = geom::to_unit(d);
    const double cg2 = r[0] * u.x + r[1] * u.y + r[2] * u.z;
    const MonoClip out2 = decode_forward(rot);
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
      CHECK(out2.samples[i] ==
            doctest::Approx(2.0 * (1.0 + cg2) * s.samples[i]).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("a source at a viewport center maximizes that viewport's RMS") {
  const geom::ViewportLayout layout = geom::default_layout();
  Rng rng(9);
  const MonoClip s = noise_clip(rng, 48000.0, 4000);
  for (std::size_t target : {std::size_t{0}, std::size_t{7}, std::size_t{17}}) {
    const FoaClip foa = encode_sources({{s, layout.centers[target]}});
    const auto waves = viewport_waveforms(foa, layout);
    REQUIRE(waves.size() == 18);
    std::size_t best = 0;
    double best_rms = -1.0;
    for (std::size_t t = 0; t < waves.size(); ++t) {
      CHECK(waves[t].samples.size() == s.samples.size());
      const double r = rms(waves[t]);
      if (r > best_rms) {
        best_rms = r;
        best = t;
      }
    }
    CHECK(best == target);
  }
}

TEST_CASE("viewport waveforms of silence are all silent") {
  FoaClip silent;
  silent.sample_rate = 32000.0;
  for (auto& ch : silent.channels) ch.assign(64, 0.0);
  const auto waves = viewport_waveforms(silent, geom::default_layout());
  CHECK(waves.size() == 18);
  for (const auto& w : waves) {
    for (double v : w.samples) CHECK(v == 0.0);
  }
}

TEST_CASE("same-rate resample is the identity") {
  Rng rng(10);
  const MonoClip s = noise_clip(rng, 32000.0, 500);
  const MonoClip out = resample(s, 32000.0);
  REQUIRE(out.samples.size() == s.samples.size());
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    CHECK(out.samples[i] == doctest::Approx(s.samples[i]).epsilon(1e-9));
  }
}

TEST_CASE("48 kHz 440 Hz tone resampled to 32 kHz keeps its DFT peak at 440 Hz") {
  const MonoClip src = tone(440.0, 48000.0, 0.25);
  const MonoClip out = resample(src, 32000.0);
  CHECK(out.sample_rate == 32000.0);
  const std::size_t n = out.samples.size();
  CHECK(n == doctest::Approx(8000.0).epsilon(0.001));
  // DFT-peak oracle over bins up to 2 kHz.
  const int kmax = static_cast<int>(2000.0 * static_cast<double>(n) / 32000.0);
  double best_mag = -1.0;
  int best_k = 0;
  for (int k = 1; k <= kmax; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ph = 2.0 * kPi * k * static_cast<double>(i) / static_cast<double>(n);
      re += out.samples[i] * std::cos(ph);
      im -= out.samples[i] * std::sin(ph);
    }
    const double mag = re * re + im * im;
    if (mag > best_mag) {
      best_mag = mag;
      best_k = k;
    }
  }
  const double peak_freq = best_k * 32000.0 / static_cast<double>(n);
  CHECK(std::abs(peak_freq - 440.0) <= 32000.0 / static_cast<double>(n));
}

TEST_CASE("constant signals survive resampling with unit gain") {
  MonoClip s;
  s.sample_rate = 48000.0;
  s.samples.assign(2000, 0.8);
  const MonoClip out = resample(s, 32000.0);
  for (std::size_t i = 100; i + 100 < out.samples.size(); ++i) {
    CHECK(out.samples[i] == doctest::Approx(0.8).epsilon(1e-6));
  }
}

TEST_CASE("mel spectrogram of silence sits at the log floor") {
  MonoClip s;
  s.sample_rate = 32000.0;
  s.samples.assign(3200, 0.0);
  const MelSpec mel = mel_spectrogram(s);
  CHECK(mel.n_mels == 128);
  for (double v : mel.data) CHECK(v == doctest::Approx(std::log(1e-10)).epsilon(1e-12));
}

TEST_CASE("1 kHz tone concentrates energy in the band containing 1 kHz") {
  const MelSpec mel = mel_spectrogram(tone(1000.0, 32000.0, 0.5));
  // Mean energy per band over frames, then locate the peak band.
  std::vector<double> band(mel.n_mels, 0.0);
  for (int f = 0; f < mel.frames; ++f) {
    for (int m = 0; m < mel.n_mels; ++m) band[m] += mel.at(f, m);
  }
  int best = 0;
  for (int m = 1; m < mel.n_mels; ++m) {
    if (band[m] > band[best]) best = m;
  }
  const double mel_lo = hz_to_mel(0.0), mel_hi = hz_to_mel(16000.0);
  const double center_hz = mel_to_hz(mel_lo + (mel_hi - mel_lo) * (best + 1) / (mel.n_mels + 1));
  // One band spacing at 1 kHz is ~42 Hz.
  CHECK(std::abs(center_hz - 1000.0) < 60.0);
}

TEST_CASE("frame count formula: 4 s at 32 kHz, win 800, hop 320 gives 398 frames") {
  MonoClip s;
  s.sample_rate = 32000.0;
  s.samples.assign(128000, 0.01);
  const MelSpec mel = mel_spectrogram(s);
  CHECK(mel.frames == 398);
  CHECK(mel.win == 800);
  CHECK(mel.hop == 320);
}

TEST_CASE("mel rejects too-short clips and wrong rates") {
  MonoClip s;
  s.sample_rate = 32000.0;
  s.samples.assign(700, 0.0);
  CHECK_THROWS_AS(mel_spectrogram(s), DataError);
  s.sample_rate = 44100.0;
  s.samples.assign(4000, 0.0);
  CHECK_THROWS_AS(mel_spectrogram(s), DataError);
}

TEST_CASE("audio features: zero weights give a zero vector of dim 128") {
  const MelSpec mel = mel_spectrogram(tone(500.0, 32000.0, 0.2));
  const auto pooled = mel_mean_pool(mel);
  REQUIRE(pooled.size() == 128);
  const ag::Tensor w1 = ag::Tensor::zeros({128, 128});
  const ag::Tensor b1 = ag::Tensor::zeros({128});
  const ag::Tensor w2 = ag::Tensor::zeros({128, 128});
  const ag::Tensor b2 = ag::Tensor::zeros({128});
  const ag::Tensor feat = audio_feature_forward(pooled, w1, b1, w2, b2);
  REQUIRE(feat.shape() == ag::Shape{128});
  for (double v : feat.values()) CHECK(v == 0.0);
}

TEST_CASE("mean pooling equals the arithmetic mean oracle") {
  const MelSpec mel = mel_spectrogram(tone(750.0, 32000.0, 0.3));
  const auto pooled = mel_mean_pool(mel);
  for (int m = 0; m < mel.n_mels; m += 17) {
    double acc = 0.0;
    for (int f = 0; f < mel.frames; ++f) acc += mel.at(f, m);
    CHECK(pooled[m] == doctest::Approx(acc / mel.frames).epsilon(1e-12));
  }
}

TEST_CASE("WAV float32 round-trip is exact for float data") {
  Rng rng(11);
  WavData data;
  data.sample_rate = 32000.0;
  data.channels.assign(2, std::vector<double>(333));
  for (auto& ch : data.channels) {
    for (auto& v : ch) v = static_cast<float>(uniform(rng, -1.0, 1.0));
  }
  write_wav("test_audio_io.wav", data);
  const WavData back = read_wav("test_audio_io.wav");
  CHECK(back.sample_rate == 32000.0);
  REQUIRE(back.channels.size() == 2);
  for (int c = 0; c < 2; ++c) CHECK(back.channels[c] == data.channels[c]);
  std::remove("test_audio_io.wav");
}

TEST_CASE("WAV PCM16 and PCM24 round-trips are within quantization error") {
  Rng rng(12);
  WavData data;
  data.sample_rate = 48000.0;
  data.channels.assign(1, std::vector<double>(256));
  for (auto& v : data.channels[0]) v = uniform(rng, -0.99, 0.99);

  write_wav("test_audio_io16.wav", data, WavFormat::kPcm16);
  const WavData b16 = read_wav("test_audio_io16.wav");
  for (std::size_t i = 0; i < 256; ++i) {
    CHECK(b16.channels[0][i] == doctest::Approx(data.channels[0][i]).epsilon(2e-4).scale(1.0));
  }
  std::remove("test_audio_io16.wav");

  write_wav("test_audio_io24.wav", data, WavFormat::kPcm24);
  const WavData b24 = read_wav("test_audio_io24.wav");
  for (std::size_t i = 0; i < 256; ++i) {
    CHECK(b24.channels[0][i] == doctest::Approx(data.channels[0][i]).epsilon(1e-6).scale(1.0));
  }
  std::remove("test_audio_io24.wav");
}

TEST_CASE("FOA WAV round-trip and the WXYZ reorder flag") {
  Rng rng(13);
  FoaClip foa = encode_sources({{noise_clip(rng, 48000.0, 128), {0.3, 1.0}}});
  write_wav_foa("test_audio_foa.wav", foa);
  const FoaClip back = read_wav_foa("test_audio_foa.wav");
  for (int c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < foa.length(); ++i) {
      CHECK(back.channels[c][i] == doctest::Approx(foa.channels[c][i]).epsilon(1e-7).scale(1.0));
    }
  }
  // Reinterpreting the same (W,Y,Z,X) file as (W,X,Y,Z) swaps the dipoles.
  const FoaClip swapped = read_wav_foa("test_audio_foa.wav", /*wxyz_order=*/true);
  for (std::size_t i = 0; i < foa.length(); ++i) {
    CHECK(swapped.x()[i] == doctest::Approx(back.y()[i]).epsilon(1e-12).scale(1.0));
  }
  std::remove("test_audio_foa.wav");
}
