#pragma once

#include <optional>
#include <string>
#include <vector>

#include "omnisal/audio/foa.hpp"
#include "omnisal/net/model.hpp"

namespace omnisal::fusion {

using ag::Tensor;

struct AvConfig {
  int audio_dim = 128;    // d_hat, per-viewport audio feature size
  int bottleneck = 64;    // k, adapter bottleneck (k << d, d_hat)
  double scale_init = 0.1;
  int mlp_hidden = 128;
  double window_s = 4.0;  // audio window, clamped from the clip tail

  void validate(int token_dim) const;
  std::string to_json() const;
  static AvConfig from_json(const std::string& text);
};

// SalViT360-AV: the visual model plus one bottleneck adapter per transformer
// block (parallel to the frozen feed-forward path) and a small trainable MLP
// over pooled mel features. Without audio, or with a zero adapter scale, the
// forward pass takes the identical arithmetic path as the visual model.
class AvSaliencyModel {
 public:
  AvSaliencyModel(net::NetConfig cfg, AvConfig av_cfg, geom::ViewportLayout layout);

  void init_params(Rng& rng);

  net::SaliencyModel& visual() { return visual_; }
  const net::SaliencyModel& visual() const { return visual_; }
  const AvConfig& av_config() const { return av_cfg_; }
  ag::ParamStore& params() { return visual_.params(); }
  const ag::ParamStore& params() const { return visual_.params(); }

  // Adapter freeze mask: adapter parameters and the audio MLP are trainable,
  // every "vis.*" tensor stays frozen.
  std::vector<std::string> trainable_names() const;
  std::vector<std::string> frozen_names() const;
  // Closed form (d + d_hat) k + k d + 2 (d + d_hat) + 1 per block.
  std::size_t adapter_parameters_per_block() const;

  // Per-viewport pooled log-mel vectors (constants for a given clip): rotate
  // to the viewport, decode, clamp to the last window_s seconds, resample to
  // 32 kHz, zero-pad, mel, temporal mean.
  std::vector<std::vector<double>> pooled_audio(const audio::FoaClip& foa) const;

  // Trainable audio features from the pooled vectors, one [d_hat] per viewport.
  std::vector<Tensor> audio_features(const std::vector<std::vector<double>>& pooled) const;

  net::AdapterHook make_adapter_hook(const std::vector<Tensor>& features) const;

  Tensor forward_from_patches(const std::vector<std::vector<Tensor>>& patches,
                              const std::optional<std::vector<std::vector<double>>>& pooled) const;

  geom::ErpGrid forward(const std::vector<geom::ErpGrid>& clip,
                        const std::optional<audio::FoaClip>& foa, int jobs = 1) const;

  // Adapter-only checkpoint (subset manifest over the trainable names).
  void save_adapters(const std::string& basename) const;
  void load_adapters(const std::string& basename);

 private:
  net::SaliencyModel visual_;
  AvConfig av_cfg_;
};

}  // namespace omnisal::fusion
