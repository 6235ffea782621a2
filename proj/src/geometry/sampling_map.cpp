#include "omnisal/geometry/sampling_map.hpp"

#include <algorithm>
#include <cmath>

#include "omnisal/common/parallel.hpp"

namespace omnisal::geom {

namespace {

struct TangentFrame {
  Vec3 center, east, north;
};

TangentFrame frame_of(const SphericalCoord& c) {
  const double st = std::sin(c.lat), ct = std::cos(c.lat);
  const double sl = std::sin(c.lon), cl = std::cos(c.lon);
  return {{ct * cl, ct * sl, st}, {-sl, cl, 0.0}, {-st * cl, -st * sl, ct}};
}

// Four bilinear taps for a clamped raster sample at fractional (fi, fj).
struct Taps {
  int idx[4];
  double w[4];
};

Taps raster_taps(double fi, double fj, int h, int w) {
  const int i0 = static_cast<int>(std::floor(fi));
  const int j0 = static_cast<int>(std::floor(fj));
  const double a = fi - i0;
  const double b = fj - j0;
  const int r0 = std::clamp(i0, 0, h - 1), r1 = std::clamp(i0 + 1, 0, h - 1);
  const int c0 = std::clamp(j0, 0, w - 1), c1 = std::clamp(j0 + 1, 0, w - 1);
  return {{r0 * w + c0, r0 * w + c1, r1 * w + c0, r1 * w + c1},
          {(1.0 - a) * (1.0 - b), (1.0 - a) * b, a * (1.0 - b), a * b}};
}

Taps erp_taps(double fi, double fj, int h, int w) {
  const int i0 = static_cast<int>(std::floor(fi));
  const int j0 = static_cast<int>(std::floor(fj));
  const double a = fi - i0;
  const double b = fj - j0;
  const int r0 = std::clamp(i0, 0, h - 1), r1 = std::clamp(i0 + 1, 0, h - 1);
  int c0 = j0 % w, c1 = (j0 + 1) % w;
  if (c0 < 0) c0 += w;
  if (c1 < 0) c1 += w;
  return {{r0 * w + c0, r0 * w + c1, r1 * w + c0, r1 * w + c1},
          {(1.0 - a) * (1.0 - b), (1.0 - a) * b, a * (1.0 - b), a * b}};
}

}  // namespace

SamplingMap build_sampling_map(const ViewportLayout& layout, int erp_height, int erp_width,
                               int jobs) {
  if (erp_width != 2 * erp_height) throw DataError("build_sampling_map: W must equal 2H");
  if (layout.fov_deg <= 0.0 || layout.fov_deg >= 180.0) {
    throw DataError("build_sampling_map: fov out of range");
  }
  SamplingMap map;
  map.viewports = static_cast<int>(layout.count());
  map.patch = layout.patch_size;
  map.erp_height = erp_height;
  map.erp_width = erp_width;
  map.plane_half_extent = layout.half_extent();

  const int p = map.patch;
  const int t_count = map.viewports;
  const double r = map.plane_half_extent;
  const ErpGrid probe(erp_height, 1);  // coordinate conventions only

  // Forward: tangent pixel centers span [-r, +r]^2 linearly; top row is north.
  map.erp_i.resize(map.tangent_pixels());
  map.erp_j.resize(map.tangent_pixels());
  parallel_for(static_cast<std::size_t>(t_count), jobs, [&](std::size_t t) {
    const SphericalCoord center = layout.centers[t];
    for (int row = 0; row < p; ++row) {
      const double y = r - (row + 0.5) * 2.0 * r / p;
      for (int col = 0; col < p; ++col) {
        const double x = -r + (col + 0.5) * 2.0 * r / p;
        const SphericalCoord q = gnomonic_inverse(center, {x, y});
        double fi, fj;
        probe.fractional_pixel(q, fi, fj);
        const std::size_t k = (t * static_cast<std::size_t>(p) + row) * p + col;
        map.erp_i[k] = fi;
        map.erp_j[k] = fj;
      }
    }
  });

  // Inverse: per-pixel membership test against every tangent plane. Rows are
  // processed independently; each keeps its own offsets so the final CSR can
  // be stitched together deterministically.
  std::vector<std::vector<SamplingMap::Cover>> row_covers(erp_height);
  std::vector<std::vector<std::uint32_t>> row_offsets(erp_height);
  std::vector<TangentFrame> frames(t_count);
  for (int t = 0; t < t_count; ++t) frames[t] = frame_of(layout.centers[t]);
  parallel_for(static_cast<std::size_t>(erp_height), jobs, [&](std::size_t i) {
    auto& covers = row_covers[i];
    auto& offsets = row_offsets[i];
    offsets.reserve(erp_width + 1);
    offsets.push_back(0);
    for (int j = 0; j < erp_width; ++j) {
      const Vec3 d = to_unit(probe.pixel_center(static_cast<int>(i), j));
      for (int t = 0; t < t_count; ++t) {
        const TangentFrame& fr = frames[t];
        const double s = dot(d, fr.center);
        if (s <= 0.0) continue;
        const double x = dot(d, fr.east) / s;
        const double y = dot(d, fr.north) / s;
        if (std::abs(x) > r || std::abs(y) > r) continue;
        const double col = (x + r) * p / (2.0 * r) - 0.5;
        const double row = (r - y) * p / (2.0 * r) - 0.5;
        covers.push_back({static_cast<std::uint16_t>(t), row, col, s});
      }
      offsets.push_back(static_cast<std::uint32_t>(covers.size()));
    }
  });

  std::size_t total = 0;
  for (const auto& rc : row_covers) total += rc.size();
  map.covers.reserve(total);
  map.cover_offsets.reserve(map.erp_pixels() + 1);
  map.cover_offsets.push_back(0);
  for (int i = 0; i < erp_height; ++i) {
    const auto& covers = row_covers[i];
    const auto& offsets = row_offsets[i];
    for (int j = 0; j < erp_width; ++j) {
      for (std::uint32_t k = offsets[j]; k < offsets[j + 1]; ++k) map.covers.push_back(covers[k]);
      map.cover_offsets.push_back(map.covers.size());
    }
  }
  return map;
}

std::vector<Raster> project_to_tangents(const ErpGrid& erp, const SamplingMap& map, int jobs) {
  if (erp.height != map.erp_height || erp.width != map.erp_width) {
    throw ShapeError("project_to_tangents: ERP size does not match the sampling map");
  }
  const int p = map.patch;
  std::vector<Raster> patches(map.viewports, Raster(p, p, erp.channels));
  parallel_for(static_cast<std::size_t>(map.viewports), jobs, [&](std::size_t t) {
    Raster& patch = patches[t];
    for (int row = 0; row < p; ++row) {
      for (int col = 0; col < p; ++col) {
        const std::size_t k = (t * static_cast<std::size_t>(p) + row) * p + col;
        for (int c = 0; c < erp.channels; ++c) {
          patch.at(c, row, col) = sample_erp_bilinear(erp, c, map.erp_i[k], map.erp_j[k]);
        }
      }
    }
  });
  return patches;
}

std::pair<ErpGrid, ErpGrid> back_project(const std::vector<Raster>& patches, const SamplingMap& map,
                                         int jobs, BlendMode blend) {
  if (static_cast<int>(patches.size()) != map.viewports) {
    throw ShapeError("back_project: patch count does not match the sampling map");
  }
  const int channels = patches.empty() ? 1 : patches[0].channels;
  for (const auto& patch : patches) {
    if (patch.height != map.patch || patch.width != map.patch || patch.channels != channels) {
      throw ShapeError("back_project: patch size does not match the sampling map");
    }
  }
  ErpGrid out(map.erp_height, channels);
  ErpGrid weights(map.erp_height, 1);
  parallel_for(static_cast<std::size_t>(map.erp_height), jobs, [&](std::size_t i) {
    for (int j = 0; j < map.erp_width; ++j) {
      const std::size_t pix = i * map.erp_width + j;
      const std::uint64_t lo = map.cover_offsets[pix], hi = map.cover_offsets[pix + 1];
      if (lo == hi) continue;
      double wsum = 0.0;
      for (std::uint64_t k = lo; k < hi; ++k) {
        wsum += blend == BlendMode::kUniform ? 1.0 : map.covers[k].cos_dist;
      }
      weights.at(0, static_cast<int>(i), j) = wsum;
      for (int c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::uint64_t k = lo; k < hi; ++k) {
          const auto& cov = map.covers[k];
          const double w = blend == BlendMode::kUniform ? 1.0 : cov.cos_dist;
          acc += w * sample_raster_bilinear(patches[cov.viewport], c, cov.row, cov.col);
        }
        out.at(c, static_cast<int>(i), j) = acc / wsum;
      }
    }
  });
  return {std::move(out), std::move(weights)};
}

ErpGrid overlap_mask(const ViewportLayout& layout, int erp_height, int erp_width, int jobs) {
  const SamplingMap map = build_sampling_map(layout, erp_height, erp_width, jobs);
  ErpGrid mask(erp_height, 1);
  for (int i = 0; i < erp_height; ++i) {
    for (int j = 0; j < erp_width; ++j) {
      mask.at(0, i, j) = static_cast<double>(map.coverage(i, j));
    }
  }
  return mask;
}

std::shared_ptr<const LinearMap> projection_operator(const SamplingMap& map) {
  LinearMapBuilder b(map.erp_pixels(), map.tangent_pixels());
  for (std::size_t k = 0; k < map.tangent_pixels(); ++k) {
    const Taps taps = erp_taps(map.erp_i[k], map.erp_j[k], map.erp_height, map.erp_width);
    for (int q = 0; q < 4; ++q) b.add(static_cast<std::size_t>(taps.idx[q]), taps.w[q]);
    b.finish_row();
  }
  return std::make_shared<const LinearMap>(b.build());
}

std::shared_ptr<const LinearMap> backprojection_operator(const SamplingMap& map, BlendMode blend) {
  LinearMapBuilder b(map.tangent_pixels(), map.erp_pixels());
  const std::size_t plane = static_cast<std::size_t>(map.patch) * map.patch;
  for (std::size_t pix = 0; pix < map.erp_pixels(); ++pix) {
    const std::uint64_t lo = map.cover_offsets[pix], hi = map.cover_offsets[pix + 1];
    if (lo != hi) {
      double wsum = 0.0;
      for (std::uint64_t k = lo; k < hi; ++k) {
        wsum += blend == BlendMode::kUniform ? 1.0 : map.covers[k].cos_dist;
      }
      for (std::uint64_t k = lo; k < hi; ++k) {
        const auto& cov = map.covers[k];
        const double w = (blend == BlendMode::kUniform ? 1.0 : cov.cos_dist) / wsum;
        const Taps taps = raster_taps(cov.row, cov.col, map.patch, map.patch);
        for (int q = 0; q < 4; ++q) {
          b.add(cov.viewport * plane + static_cast<std::size_t>(taps.idx[q]), w * taps.w[q]);
        }
      }
    }
    b.finish_row();
  }
  return std::make_shared<const LinearMap>(b.build());
}

}  // namespace omnisal::geom
