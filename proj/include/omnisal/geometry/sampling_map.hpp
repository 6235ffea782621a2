#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "omnisal/common/linear_map.hpp"
#include "omnisal/geometry/erp_grid.hpp"
#include "omnisal/geometry/layout.hpp"

namespace omnisal::geom {

// Precomputed ERP <-> tangent resampling tables for one (layout, H, W).
// Immutable after construction; safe to share across threads.
struct SamplingMap {
  int viewports = 0;
  int patch = 0;
  int erp_height = 0;
  int erp_width = 0;
  double plane_half_extent = 0.0;  // tan(fov/2)

  // Forward table: fractional ERP coordinates for tangent pixel (t, r, c),
  // flat index (t*patch + r)*patch + c.
  std::vector<double> erp_i;
  std::vector<double> erp_j;

  // Inverse table: for each ERP pixel, the viewports whose tangent plane
  // contains it and the fractional patch coordinates of the hit.
  struct Cover {
    std::uint16_t viewport;
    double row;
    double col;
    double cos_dist;  // cosine of the angle to the viewport center
  };
  std::vector<std::uint64_t> cover_offsets;  // H*W + 1
  std::vector<Cover> covers;

  int coverage(int i, int j) const {
    const std::size_t p = static_cast<std::size_t>(i) * erp_width + j;
    return static_cast<int>(cover_offsets[p + 1] - cover_offsets[p]);
  }
  std::size_t tangent_pixels() const {
    return static_cast<std::size_t>(viewports) * patch * patch;
  }
  std::size_t erp_pixels() const {
    return static_cast<std::size_t>(erp_height) * erp_width;
  }
};

SamplingMap build_sampling_map(const ViewportLayout& layout, int erp_height, int erp_width,
                               int jobs = 1);

// ERP clip -> T tangent patches of patch x patch x C (bilinear, lon wrap).
std::vector<Raster> project_to_tangents(const ErpGrid& erp, const SamplingMap& map, int jobs = 1);

enum class BlendMode { kUniform, kCosineWeighted };

// Tangent patches -> ERP. Covered pixels average the bilinear samples of all
// covering viewports (uniform by default, cosine-of-angular-distance behind
// the flag); uncovered pixels are 0. Second grid holds the blend weights.
std::pair<ErpGrid, ErpGrid> back_project(const std::vector<Raster>& patches, const SamplingMap& map,
                                         int jobs = 1, BlendMode blend = BlendMode::kUniform);

// Per-pixel viewport coverage counts as a 1-channel ERP grid.
ErpGrid overlap_mask(const ViewportLayout& layout, int erp_height, int erp_width, int jobs = 1);

// The same resampling steps as fixed sparse operators over one channel plane:
// projection maps H*W -> T*p*p, back-projection maps T*p*p -> H*W.
std::shared_ptr<const LinearMap> projection_operator(const SamplingMap& map);
std::shared_ptr<const LinearMap> backprojection_operator(const SamplingMap& map,
                                                         BlendMode blend = BlendMode::kUniform);

}  // namespace omnisal::geom
