#include "omnisal/toy/toytrain.hpp"

#include <cmath>
#include <ostream>

#include "omnisal/sal/losses.hpp"
#include "omnisal/sal/metrics.hpp"
#include "omnisal/tensor/optim.hpp"

namespace omnisal::toy {

using ag::Tensor;

net::NetConfig toy_net_config() {
  net::NetConfig cfg;
  cfg.frames = 2;
  cfg.token_dim = 64;
  cfg.heads = 4;
  cfg.depth = 2;
  cfg.patch = 32;
  cfg.decoder_out = 32;
  cfg.erp_height = 64;
  cfg.encoder_channels = {16, 32, 64};
  cfg.validate();
  return cfg;
}

fusion::AvConfig toy_av_config() {
  fusion::AvConfig av;
  av.audio_dim = 128;
  av.bottleneck = 16;
  av.mlp_hidden = 64;
  return av;
}

geom::ViewportLayout toy_layout() {
  geom::ViewportLayout layout = geom::augmented_layout(geom::AugmentKind::kCoarse);
  layout.patch_size = 32;
  return layout;
}

namespace {

double gauss_at(const geom::SphericalCoord& a, const geom::SphericalCoord& b, double sigma_rad) {
  const double gamma = geom::angular_distance(a, b);
  return std::exp(-gamma * gamma / (2.0 * sigma_rad * sigma_rad));
}

}  // namespace

std::vector<ToyClip> make_visual_dataset(const net::NetConfig& cfg, int clips, Rng& rng) {
  const int h = cfg.erp_height, w = 2 * cfg.erp_height;
  std::vector<ToyClip> out;
  for (int k = 0; k < clips; ++k) {
    ToyClip clip;
    clip.target = geom::canonical({0.0, 2.0 * geom::kPi * k / std::max(1, clips)});
    const double blob_sigma = geom::deg_to_rad(22.0);
    const double gt_sigma = geom::deg_to_rad(18.0);
    for (int f = 0; f < cfg.frames; ++f) {
      geom::ErpGrid frame(h, 3);
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
          const auto c = frame.pixel_center(i, j);
          const double blob = gauss_at(c, clip.target, blob_sigma);
          const double texture = 0.03 * std::cos(3.0 * c.lon + f * 0.2) * std::cos(2.0 * c.lat);
          frame.at(0, i, j) = std::clamp(0.10 + 0.85 * blob + texture, 0.0, 1.0);
          frame.at(1, i, j) = std::clamp(0.12 + 0.70 * blob + texture, 0.0, 1.0);
          frame.at(2, i, j) = std::clamp(0.08 + 0.55 * blob - texture, 0.0, 1.0);
        }
      }
      clip.frames.push_back(std::move(frame));
    }
    geom::ErpGrid sal(h, 1);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        sal.at(0, i, j) = gauss_at(sal.pixel_center(i, j), clip.target, gt_sigma);
      }
    }
    sal::normalize_sum1(sal);
    clip.saliency = sal;

    geom::ErpGrid fix(h, 1);
    int placed = 0;
    while (placed < 6) {
      const double dlat = geom::deg_to_rad(uniform(rng, -12.0, 12.0));
      const double dlon = geom::deg_to_rad(uniform(rng, -12.0, 12.0));
      const auto c = geom::canonical({clip.target.lat + dlat, clip.target.lon + dlon});
      const int i = std::clamp(static_cast<int>((geom::kPi / 2 - c.lat) * h / geom::kPi), 0, h - 1);
      const int j = ((static_cast<int>((c.lon + geom::kPi) * w / (2 * geom::kPi))) % w + w) % w;
      if (fix.at(0, i, j) == 0.0) {
        fix.at(0, i, j) = 1.0;
        ++placed;
      }
    }
    clip.fixations = fix;
    out.push_back(std::move(clip));
  }
  return out;
}

VisualToyReport train_visual_toy(net::SaliencyModel& model, const std::vector<ToyClip>& data,
                                 std::size_t max_steps, std::ostream* log,
                                 std::size_t eval_every) {
  VisualToyReport report;
  // Tangent patches and targets are constant across steps.
  std::vector<std::vector<std::vector<Tensor>>> patches;
  std::vector<Tensor> targets, fixmaps;
  for (const auto& clip : data) {
    patches.push_back(model.project_clip(clip.frames));
    targets.push_back(Tensor::from_data({clip.saliency.data.size()}, clip.saliency.data));
    fixmaps.push_back(Tensor::from_data({clip.fixations.data.size()}, clip.fixations.data));
  }

  ag::AdamWConfig cfg;  // (0.9, 0.999), wd 1e-2, lr 1e-5 by construction
  ag::AdamW opt(model.params().tensors(), cfg);

  auto clip_loss = [&](std::size_t k) {
    return sal::supervised_loss(model.forward_from_patches(patches[k]), targets[k], fixmaps[k]);
  };
  auto dataset_loss = [&]() {
    double acc = 0.0;
    for (std::size_t k = 0; k < data.size(); ++k) acc += clip_loss(k).item();
    return acc / static_cast<double>(data.size());
  };
  auto evaluate = [&](VisualToyReport& r) {
    r.kld_per_clip.clear();
    r.cc_per_clip.clear();
    for (std::size_t k = 0; k < data.size(); ++k) {
      const geom::ErpGrid pred = model.map_from_tensor(model.forward_from_patches(patches[k]));
      r.kld_per_clip.push_back(sal::kld(data[k].saliency, pred));
      r.cc_per_clip.push_back(sal::cc(pred, data[k].saliency));
    }
  };

  report.loss_first = dataset_loss();
  for (std::size_t step = 0; step < max_steps; ++step) {
    // Clips alternate per step (stochastic full sweep every |data| steps).
    const std::size_t k = step % data.size();
    opt.zero_grad();
    const Tensor loss = clip_loss(k);
    loss.backward();
    opt.step(ag::cosine_lr(step, max_steps, 1e-5, 2e-6));
    report.steps = step + 1;

    if (log && (step % eval_every == 0 || step + 1 == max_steps)) {
      evaluate(report);
      *log << "step " << step << " loss " << loss.item() << " kld";
      for (double v : report.kld_per_clip) *log << ' ' << v;
      *log << " cc";
      for (double v : report.cc_per_clip) *log << ' ' << v;
      *log << '\n';
    }
  }
  report.loss_last = dataset_loss();
  evaluate(report);
  return report;
}

double viewport_mass(const geom::ErpGrid& map, const geom::SamplingMap& sampling, int viewport) {
  double acc = 0.0;
  for (int i = 0; i < map.height; ++i) {
    for (int j = 0; j < map.width; ++j) {
      const std::size_t pix = static_cast<std::size_t>(i) * map.width + j;
      for (auto k = sampling.cover_offsets[pix]; k < sampling.cover_offsets[pix + 1]; ++k) {
        if (sampling.covers[k].viewport == viewport) {
          acc += map.at(0, i, j);
          break;
        }
      }
    }
  }
  return acc;
}

AdapterToyReport train_adapter_toy(fusion::AvSaliencyModel& model, std::size_t steps, Rng& rng,
                                   std::ostream* log, double lr) {
  AdapterToyReport report;
  const net::NetConfig& cfg = model.visual().config();
  const geom::ViewportLayout& layout = model.visual().layout();

  // The sounding viewport: an equator viewport of the coarse layout.
  const int target_viewport = static_cast<int>(layout.count()) / 2;
  const geom::SphericalCoord dir = layout.centers[target_viewport];

  // Visual frames carry a faint texture only; the audio carries the cue.
  std::vector<geom::ErpGrid> frames;
  for (int f = 0; f < cfg.frames; ++f) {
    geom::ErpGrid frame(cfg.erp_height, 3);
    for (int i = 0; i < frame.height; ++i) {
      for (int j = 0; j < frame.width; ++j) {
        const auto c = frame.pixel_center(i, j);
        const double v = 0.4 + 0.05 * std::cos(2.0 * c.lon) * std::cos(c.lat);
        for (int ch = 0; ch < 3; ++ch) frame.at(ch, i, j) = v;
      }
    }
    frames.push_back(std::move(frame));
  }
  audio::MonoClip tone;
  tone.sample_rate = 32000.0;
  tone.samples.resize(32000);
  for (std::size_t i = 0; i < tone.samples.size(); ++i) {
    tone.samples[i] = 0.7 * std::sin(2.0 * geom::kPi * 440.0 * i / 32000.0) +
                      0.2 * std::sin(2.0 * geom::kPi * 1320.0 * i / 32000.0);
  }
  const audio::FoaClip foa = audio::encode_sources({{tone, dir}});

  geom::ErpGrid sal(cfg.erp_height, 1);
  for (int i = 0; i < sal.height; ++i) {
    for (int j = 0; j < sal.width; ++j) {
      sal.at(0, i, j) = gauss_at(sal.pixel_center(i, j), dir, geom::deg_to_rad(16.0));
    }
  }
  sal::normalize_sum1(sal);
  geom::ErpGrid fix(cfg.erp_height, 1);
  for (int k = 0; k < 5; ++k) {
    const auto c = geom::canonical({dir.lat + geom::deg_to_rad(uniform(rng, -10.0, 10.0)),
                                    dir.lon + geom::deg_to_rad(uniform(rng, -10.0, 10.0))});
    const int i = std::clamp(
        static_cast<int>((geom::kPi / 2 - c.lat) * cfg.erp_height / geom::kPi), 0,
        cfg.erp_height - 1);
    const int j = ((static_cast<int>((c.lon + geom::kPi) * sal.width / (2 * geom::kPi))) %
                   sal.width + sal.width) % sal.width;
    fix.at(0, i, j) = 1.0;
  }

  const auto patches = model.visual().project_clip(frames);
  const auto pooled = model.pooled_audio(foa);
  const Tensor target = Tensor::from_data({sal.data.size()}, sal.data);
  const Tensor fixmap = Tensor::from_data({fix.data.size()}, fix.data);

  // Freeze the host; only adapter and audio-MLP tensors train.
  std::map<std::string, std::vector<double>> frozen_snapshot;
  for (const auto& name : model.frozen_names()) {
    frozen_snapshot[name] = model.params().at(name).values();
    model.params().at(name).set_requires_grad(false);
  }

  const geom::ErpGrid before =
      model.visual().map_from_tensor(model.forward_from_patches(patches, pooled));
  report.mass_before = viewport_mass(before, model.visual().output_map(), target_viewport);

  ag::AdamWConfig opt_cfg;
  opt_cfg.lr = lr;
  ag::AdamW opt(model.params().tensors(model.trainable_names()), opt_cfg);
  for (std::size_t step = 0; step < steps; ++step) {
    opt.zero_grad();
    const Tensor loss =
        sal::supervised_loss(model.forward_from_patches(patches, pooled), target, fixmap);
    if (step == 0) report.loss_first = loss.item();
    report.loss_last = loss.item();
    loss.backward();
    opt.step();
    if (log && step % 50 == 0) *log << "adapter step " << step << " loss " << loss.item() << '\n';
  }
  report.steps = steps;

  const geom::ErpGrid after =
      model.visual().map_from_tensor(model.forward_from_patches(patches, pooled));
  report.mass_after = viewport_mass(after, model.visual().output_map(), target_viewport);

  report.frozen_intact = true;
  for (const auto& name : model.frozen_names()) {
    model.params().at(name).set_requires_grad(true);
    if (model.params().at(name).values() != frozen_snapshot[name]) report.frozen_intact = false;
  }
  return report;
}

}  // namespace omnisal::toy
