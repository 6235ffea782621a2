#include "omnisal/audio/mel.hpp"

#include <cmath>

namespace omnisal::audio {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelSpec mel_spectrogram(const MonoClip& clip, const MelParams& params) {
  if (clip.sample_rate != params.sample_rate) {
    throw DataError("mel_spectrogram: clip must be at the configured sample rate");
  }
  const int win = params.win, hop = params.hop;
  const std::size_t n = clip.samples.size();
  if (n < static_cast<std::size_t>(win)) {
    throw DataError("mel_spectrogram: clip shorter than one window");
  }
  const int frames = static_cast<int>((n - win) / hop) + 1;
  const int bins = win / 2 + 1;

  // Periodic Hann window.
  std::vector<double> hann(win);
  for (int i = 0; i < win; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * geom::kPi * i / win);
  }

  // Direct DFT with a shared twiddle table indexed by (k*n mod win).
  std::vector<double> cos_tab(win), sin_tab(win);
  for (int j = 0; j < win; ++j) {
    cos_tab[j] = std::cos(2.0 * geom::kPi * j / win);
    sin_tab[j] = std::sin(2.0 * geom::kPi * j / win);
  }

  // Triangular filters on the HTK mel scale between fmin and fmax.
  const double mel_lo = hz_to_mel(params.fmin), mel_hi = hz_to_mel(params.fmax);
  std::vector<double> edges(params.n_mels + 2);
  for (int m = 0; m < params.n_mels + 2; ++m) {
    edges[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (params.n_mels + 1));
  }
  const double bin_hz = params.sample_rate / win;
  // filter_weights[m] spans bins [filter_lo[m], filter_lo[m] + len).
  std::vector<int> filter_lo(params.n_mels);
  std::vector<std::vector<double>> filter_weights(params.n_mels);
  for (int m = 0; m < params.n_mels; ++m) {
    const double f0 = edges[m], f1 = edges[m + 1], f2 = edges[m + 2];
    const int b_lo = std::max(0, static_cast<int>(std::ceil(f0 / bin_hz)));
    const int b_hi = std::min(bins - 1, static_cast<int>(std::floor(f2 / bin_hz)));
    filter_lo[m] = b_lo;
    for (int b = b_lo; b <= b_hi; ++b) {
      const double f = b * bin_hz;
      double w = 0.0;
      if (f >= f0 && f <= f1 && f1 > f0) w = (f - f0) / (f1 - f0);
      else if (f > f1 && f <= f2 && f2 > f1) w = (f2 - f) / (f2 - f1);
      filter_weights[m].push_back(w);
    }
  }

  MelSpec mel;
  mel.frames = frames;
  mel.n_mels = params.n_mels;
  mel.win = win;
  mel.hop = hop;
  mel.sample_rate = params.sample_rate;
  mel.data.resize(static_cast<std::size_t>(frames) * params.n_mels);

  std::vector<double> windowed(win), power(bins);
  for (int fr = 0; fr < frames; ++fr) {
    const std::size_t start = static_cast<std::size_t>(fr) * hop;
    for (int i = 0; i < win; ++i) windowed[i] = clip.samples[start + i] * hann[i];
    for (int k = 0; k < bins; ++k) {
      double re = 0.0, im = 0.0;
      std::size_t idx = 0;
      for (int i = 0; i < win; ++i) {
        re += windowed[i] * cos_tab[idx];
        im -= windowed[i] * sin_tab[idx];
        idx += k;
        if (idx >= static_cast<std::size_t>(win)) idx -= win;
      }
      power[k] = re * re + im * im;
    }
    for (int m = 0; m < params.n_mels; ++m) {
      double e = 0.0;
      for (std::size_t q = 0; q < filter_weights[m].size(); ++q) {
        e += filter_weights[m][q] * power[filter_lo[m] + q];
      }
      mel.data[static_cast<std::size_t>(fr) * params.n_mels + m] = std::log(params.log_eps + e);
    }
  }
  return mel;
}

std::vector<double> mel_mean_pool(const MelSpec& mel) {
  std::vector<double> pooled(mel.n_mels, 0.0);
  for (int fr = 0; fr < mel.frames; ++fr) {
    for (int m = 0; m < mel.n_mels; ++m) pooled[m] += mel.at(fr, m);
  }
  for (auto& v : pooled) v /= static_cast<double>(mel.frames);
  return pooled;
}

ag::Tensor audio_feature_forward(const std::vector<double>& pooled, const ag::Tensor& w1,
                                 const ag::Tensor& b1, const ag::Tensor& w2, const ag::Tensor& b2) {
  ag::Tensor x = ag::Tensor::from_data({1, pooled.size()}, pooled);
  ag::Tensor h = ag::relu(ag::linear(x, w1, b1));
  return ag::reshape(ag::linear(h, w2, b2), {w2.extent(1)});
}

}  // namespace omnisal::audio
