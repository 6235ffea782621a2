#include "omnisal/fusion/av_model.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "omnisal/audio/mel.hpp"
#include "omnisal/audio/resample.hpp"

namespace omnisal::fusion {

using namespace omnisal::ag;
using nlohmann::json;

void AvConfig::validate(int token_dim) const {
  if (audio_dim < 1 || bottleneck < 1) throw DataError("AvConfig: dims must be positive");
  if (bottleneck >= token_dim || bottleneck >= audio_dim) {
    throw DataError("AvConfig: bottleneck k must be smaller than d and d_hat");
  }
  if (window_s <= 0.0) throw DataError("AvConfig: window must be positive");
}

std::string AvConfig::to_json() const {
  json j;
  j["audio_dim"] = audio_dim;
  j["bottleneck"] = bottleneck;
  j["scale_init"] = scale_init;
  j["mlp_hidden"] = mlp_hidden;
  j["window_s"] = window_s;
  return j.dump(2);
}

AvConfig AvConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("bad AvConfig JSON: ") + e.what());
  }
  AvConfig cfg;
  cfg.audio_dim = j.value("audio_dim", cfg.audio_dim);
  cfg.bottleneck = j.value("bottleneck", cfg.bottleneck);
  cfg.scale_init = j.value("scale_init", cfg.scale_init);
  cfg.mlp_hidden = j.value("mlp_hidden", cfg.mlp_hidden);
  cfg.window_s = j.value("window_s", cfg.window_s);
  return cfg;
}

AvSaliencyModel::AvSaliencyModel(net::NetConfig cfg, AvConfig av_cfg, geom::ViewportLayout layout)
    : visual_(std::move(cfg), std::move(layout)), av_cfg_(av_cfg) {
  av_cfg_.validate(visual_.config().token_dim);
  auto& store = visual_.params();
  const std::size_t d = static_cast<std::size_t>(visual_.config().token_dim);
  const std::size_t dh = static_cast<std::size_t>(av_cfg_.audio_dim);
  const std::size_t k = static_cast<std::size_t>(av_cfg_.bottleneck);
  for (int b = 0; b < visual_.config().depth; ++b) {
    const std::string pre = "adapter" + std::to_string(b) + ".";
    store.create(pre + "w_down", {d + dh, k});
    store.create(pre + "w_up", {k, d});
    store.create(pre + "ln.gamma", {d + dh});
    store.create(pre + "ln.beta", {d + dh});
    store.create(pre + "s", {1});
  }
  const std::size_t hidden = static_cast<std::size_t>(av_cfg_.mlp_hidden);
  store.create("audio_mlp.w1", {128, hidden});
  store.create("audio_mlp.b1", {hidden});
  store.create("audio_mlp.w2", {hidden, dh});
  store.create("audio_mlp.b2", {dh});
}

void AvSaliencyModel::init_params(Rng& rng) {
  visual_.init_params(rng);
  auto& store = visual_.params();
  const std::size_t d_plus = static_cast<std::size_t>(visual_.config().token_dim + av_cfg_.audio_dim);
  for (int b = 0; b < visual_.config().depth; ++b) {
    const std::string pre = "adapter" + std::to_string(b) + ".";
    init::normal(store.at(pre + "w_down"), rng, 0.0, std::sqrt(1.0 / static_cast<double>(d_plus)));
    // Zero-initialized up-projection: training starts exactly at the visual model.
    init::zeros(store.at(pre + "w_up"));
    init::constant(store.at(pre + "ln.gamma"), 1.0);
    init::zeros(store.at(pre + "ln.beta"));
    init::constant(store.at(pre + "s"), av_cfg_.scale_init);
  }
  init::kaiming(store.at("audio_mlp.w1"), rng, 128);
  init::zeros(store.at("audio_mlp.b1"));
  init::kaiming(store.at("audio_mlp.w2"), rng, static_cast<std::size_t>(av_cfg_.mlp_hidden));
  init::zeros(store.at("audio_mlp.b2"));
}

std::vector<std::string> AvSaliencyModel::trainable_names() const {
  std::vector<std::string> out;
  for (const auto& name : visual_.params().names()) {
    if (name.rfind("adapter", 0) == 0 || name.rfind("audio_mlp.", 0) == 0) out.push_back(name);
  }
  return out;
}

std::vector<std::string> AvSaliencyModel::frozen_names() const {
  std::vector<std::string> out;
  for (const auto& name : visual_.params().names()) {
    if (name.rfind("vis.", 0) == 0) out.push_back(name);
  }
  return out;
}

std::size_t AvSaliencyModel::adapter_parameters_per_block() const {
  const std::size_t d = static_cast<std::size_t>(visual_.config().token_dim);
  const std::size_t dh = static_cast<std::size_t>(av_cfg_.audio_dim);
  const std::size_t k = static_cast<std::size_t>(av_cfg_.bottleneck);
  return (d + dh) * k + k * d + 2 * (d + dh) + 1;
}

std::vector<std::vector<double>> AvSaliencyModel::pooled_audio(const audio::FoaClip& foa) const {
  foa.validate();
  audio::MelParams mel_params;
  const double min_duration = static_cast<double>(mel_params.win) / mel_params.sample_rate;
  if (static_cast<double>(foa.length()) / foa.sample_rate < min_duration) {
    throw DataError("audio clip shorter than one analysis window");
  }
  const auto waves = audio::viewport_waveforms(foa, visual_.layout());
  const std::size_t target_len =
      static_cast<std::size_t>(av_cfg_.window_s * mel_params.sample_rate);
  std::vector<std::vector<double>> pooled;
  pooled.reserve(waves.size());
  for (const auto& wave : waves) {
    // Clamp to the trailing window at the native rate, then bring to 32 kHz.
    audio::MonoClip tail;
    tail.sample_rate = wave.sample_rate;
    const std::size_t keep = std::min(
        wave.samples.size(), static_cast<std::size_t>(av_cfg_.window_s * wave.sample_rate));
    tail.samples.assign(wave.samples.end() - static_cast<std::ptrdiff_t>(keep), wave.samples.end());
    audio::MonoClip at32 = audio::resample(tail, mel_params.sample_rate);
    at32.samples.resize(target_len, 0.0);  // zero-pad short clips
    pooled.push_back(audio::mel_mean_pool(audio::mel_spectrogram(at32, mel_params)));
  }
  return pooled;
}

std::vector<Tensor> AvSaliencyModel::audio_features(
    const std::vector<std::vector<double>>& pooled) const {
  const auto& store = visual_.params();
  std::vector<Tensor> out;
  out.reserve(pooled.size());
  for (const auto& vec : pooled) {
    out.push_back(audio::audio_feature_forward(vec, store.at("audio_mlp.w1"),
                                               store.at("audio_mlp.b1"), store.at("audio_mlp.w2"),
                                               store.at("audio_mlp.b2")));
  }
  return out;
}

net::AdapterHook AvSaliencyModel::make_adapter_hook(const std::vector<Tensor>& features) const {
  if (features.size() != visual_.layout().count()) {
    throw ShapeError("adapter hook: one audio feature per viewport required");
  }
  return [this, features](int block, const Tensor& tokens) -> Tensor {
    const auto& store = visual_.params();
    const std::string pre = "adapter" + std::to_string(block) + ".";
    const Tensor& s = store.at(pre + "s");
    // Exact-zero scale takes the plain visual path bit for bit.
    if (s.values()[0] == 0.0) return {};
    const std::size_t t_count = tokens.extent(0);
    const std::size_t frames = tokens.extent(1);
    const std::size_t dh = static_cast<std::size_t>(av_cfg_.audio_dim);
    std::vector<Tensor> rows;
    rows.reserve(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
      const Tensor cell = reshape(features[t], {std::size_t{1}, std::size_t{1}, dh});
      rows.push_back(concat(std::vector<Tensor>(frames, cell), 1));
    }
    const Tensor aud_grid = concat(rows, 0);            // [T, F, d_hat]
    const Tensor zbar = concat<double>({tokens, aud_grid}, 2);  // [T, F, d + d_hat]
    const Tensor normed = layer_norm(zbar, std::size_t{2}, store.at(pre + "ln.gamma"),
                                     store.at(pre + "ln.beta"), 1e-5);
    const Tensor bottleneck = relu(linear(normed, store.at(pre + "w_down")));
    const Tensor up = linear(bottleneck, store.at(pre + "w_up"));
    return mul(up, s);
  };
}

Tensor AvSaliencyModel::forward_from_patches(
    const std::vector<std::vector<Tensor>>& patches,
    const std::optional<std::vector<std::vector<double>>>& pooled) const {
  if (!pooled.has_value()) return visual_.forward_from_patches(patches);
  return visual_.forward_from_patches(patches, make_adapter_hook(audio_features(*pooled)));
}

geom::ErpGrid AvSaliencyModel::forward(const std::vector<geom::ErpGrid>& clip,
                                       const std::optional<audio::FoaClip>& foa, int jobs) const {
  const auto patches = visual_.project_clip(clip, jobs);
  if (!foa.has_value()) {
    return visual_.map_from_tensor(visual_.forward_from_patches(patches));
  }
  return visual_.map_from_tensor(forward_from_patches(patches, pooled_audio(*foa)));
}

void AvSaliencyModel::save_adapters(const std::string& basename) const {
  visual_.params().save_subset(basename, trainable_names());
}

void AvSaliencyModel::load_adapters(const std::string& basename) {
  visual_.params().load_partial(basename);
}

}  // namespace omnisal::fusion
