#pragma once

#include <iosfwd>
#include <vector>

#include "omnisal/fusion/av_model.hpp"
#include "omnisal/net/model.hpp"

namespace omnisal::toy {

// Architecture of the synthetic overfit runs: F=2 frames, coarse 10-viewport
// layout, d=64, 2 blocks, 64x128 ERP maps.
net::NetConfig toy_net_config();
fusion::AvConfig toy_av_config();
geom::ViewportLayout toy_layout();

struct ToyClip {
  std::vector<geom::ErpGrid> frames;  // F frames, 3 channels, values in [0, 1]
  geom::ErpGrid saliency;             // ground-truth density map, sum 1
  geom::ErpGrid fixations;            // binary fixation map
  geom::SphericalCoord target;        // blob direction
};

// Bright localized blob over a dim background; ground truth concentrates at
// the blob. Clip k parks its blob at a different equator direction.
std::vector<ToyClip> make_visual_dataset(const net::NetConfig& cfg, int clips, Rng& rng);

struct VisualToyReport {
  double loss_first = 0.0;
  double loss_last = 0.0;
  std::vector<double> kld_per_clip;
  std::vector<double> cc_per_clip;
  std::size_t steps = 0;
};

// AdamW (0.9, 0.999), weight decay 1e-2, cosine 1e-5 -> 2e-6 over the run.
VisualToyReport train_visual_toy(net::SaliencyModel& model, const std::vector<ToyClip>& data,
                                 std::size_t max_steps, std::ostream* log = nullptr,
                                 std::size_t eval_every = 100);

struct AdapterToyReport {
  double loss_first = 0.0;
  double loss_last = 0.0;
  double mass_before = 0.0;   // predicted mass inside the sounding viewport
  double mass_after = 0.0;
  bool frozen_intact = false; // every vis.* tensor bitwise unchanged
  std::size_t steps = 0;
};

// One synthetic audio-localized example: a source fixed at one viewport
// center, ground truth saliency concentrated there, visual frames
// uninformative. Only adapter + audio-MLP parameters train.
AdapterToyReport train_adapter_toy(fusion::AvSaliencyModel& model, std::size_t steps, Rng& rng,
                                   std::ostream* log = nullptr, double lr = 2e-6);

// ERP pixel mass of a map inside the footprint of one viewport.
double viewport_mass(const geom::ErpGrid& map, const geom::SamplingMap& sampling, int viewport);

}  // namespace omnisal::toy
