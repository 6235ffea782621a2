#pragma once

#include <vector>

#include "omnisal/audio/foa.hpp"
#include "omnisal/tensor/tensor.hpp"

namespace omnisal::audio {

// Log-mel energies, frames x n_mels row-major.
struct MelSpec {
  int frames = 0;
  int n_mels = 0;
  int win = 0;
  int hop = 0;
  double sample_rate = 0.0;
  std::vector<double> data;

  double at(int frame, int mel) const { return data[static_cast<std::size_t>(frame) * n_mels + mel]; }
};

struct MelParams {
  double sample_rate = 32000.0;
  int win = 800;   // 25 ms at 32 kHz
  int hop = 320;   // 10 ms
  int n_mels = 128;
  double fmin = 0.0;
  double fmax = 16000.0;
  double log_eps = 1e-10;
};

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Hann-windowed DFT power spectrum -> triangular mel filterbank ->
// log(eps + energy). The clip must already be at params.sample_rate.
MelSpec mel_spectrogram(const MonoClip& clip, const MelParams& params = {});

// Temporal mean of the mel matrix (length n_mels).
std::vector<double> mel_mean_pool(const MelSpec& mel);

// Stand-in audio feature extractor: pooled mel -> 2-layer MLP -> d_hat.
// Weights are plain tensors so the caller controls training/freezing.
ag::Tensor audio_feature_forward(const std::vector<double>& pooled, const ag::Tensor& w1,
                                 const ag::Tensor& b1, const ag::Tensor& w2, const ag::Tensor& b2);

}  // namespace omnisal::audio
