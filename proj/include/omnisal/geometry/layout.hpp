#pragma once

#include <string>
#include <vector>

#include "omnisal/geometry/spherical.hpp"

namespace omnisal::geom {

// Tangent viewport arrangement: sphere directions, shared field-of-view and
// square patch resolution.
struct ViewportLayout {
  std::vector<SphericalCoord> centers;
  double fov_deg = 80.0;
  int patch_size = 224;

  std::size_t count() const { return centers.size(); }
  double half_extent() const { return std::tan(deg_to_rad(fov_deg) / 2.0); }
};

// One ring of viewports at a fixed latitude, equally spaced in longitude
// starting at lon 0.
struct Ring {
  double lat_deg = 0.0;
  int count = 0;
};

ViewportLayout rings_layout(const std::vector<Ring>& rings, double fov_deg, int patch_size);

// 18 viewports at latitudes -67.5, -22.5, +22.5, +67.5 with ring sizes
// (4, 5, 5, 4), fov 80 deg, 224 px patches.
ViewportLayout default_layout();

enum class AugmentKind { kShifted, kWideFov, kCoarse };

// shifted: default centers with +45 deg longitude; wide_fov: default centers
// at fov 120; coarse: 10 viewports at latitudes -60, 0, +60 with ring sizes
// (3, 4, 3) and fov 120.
ViewportLayout augmented_layout(AugmentKind kind);

AugmentKind parse_augment_kind(const std::string& name);

// Resolves "default" or an augmentation name to a layout.
ViewportLayout layout_by_name(const std::string& name);

// JSON form: {"centers_deg": [[lat, lon], ...], "fov_deg": f, "patch_size": p}
std::string layout_to_json(const ViewportLayout& layout);
ViewportLayout layout_from_json(const std::string& text);
ViewportLayout load_layout_file(const std::string& path);
void save_layout_file(const ViewportLayout& layout, const std::string& path);

}  // namespace omnisal::geom
