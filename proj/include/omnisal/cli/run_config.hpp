#pragma once

#include <cstdint>
#include <string>

#include "omnisal/fusion/av_model.hpp"
#include "omnisal/net/config.hpp"

namespace omnisal::cli {

// Shared run settings: architecture, layout choice, thresholds, seed and job
// count. JSON round-trips exactly; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string layout = "default";  // default | shifted | wide-fov | coarse | path to JSON
  net::NetConfig net;
  fusion::AvConfig av;
  double idt_dispersion_deg = 1.5;
  double idt_min_dur_s = 0.1;
  double density_sigma_deg = 1.0;
  double consistency_window_s = 2.0;

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;

  geom::ViewportLayout resolve_layout() const;
};

}  // namespace omnisal::cli
