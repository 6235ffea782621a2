#pragma once

#include <cstddef>
#include <vector>

#include "omnisal/common/error.hpp"
#include "omnisal/geometry/spherical.hpp"

namespace omnisal::geom {

// Planar multi-channel raster, stored channel-planar: index (c*H + i)*W + j,
// rows top to bottom within each channel plane.
struct Raster {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Raster() = default;
  Raster(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {
    if (h <= 0 || w <= 0 || c <= 0) throw DataError("Raster: non-positive dimensions");
  }

  double& at(int c, int i, int j) {
    return data[(static_cast<std::size_t>(c) * height + i) * width + j];
  }
  double at(int c, int i, int j) const {
    return data[(static_cast<std::size_t>(c) * height + i) * width + j];
  }
  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
};

// Equirectangular raster; the 2:1 aspect (W = 2H) is enforced structurally.
// Pixel (i, j) center direction:
//   lat = pi/2 - pi (i + 0.5) / H,  lon = -pi + 2 pi (j + 0.5) / W.
struct ErpGrid : Raster {
  ErpGrid() = default;
  ErpGrid(int h, int c, double fill = 0.0) : Raster(h, 2 * h, c, fill) {}

  static ErpGrid from_raster(Raster r) {
    if (r.width != 2 * r.height) {
      throw DataError("ErpGrid: width must equal 2 * height");
    }
    ErpGrid g;
    static_cast<Raster&>(g) = std::move(r);
    return g;
  }

  SphericalCoord pixel_center(int i, int j) const {
    return {kPi / 2.0 - kPi * (i + 0.5) / height, -kPi + 2.0 * kPi * (j + 0.5) / width};
  }

  // Fractional pixel coordinates of a direction (inverse of pixel_center).
  void fractional_pixel(const SphericalCoord& c, double& fi, double& fj) const {
    fi = (kPi / 2.0 - c.lat) * height / kPi - 0.5;
    fj = (c.lon + kPi) * width / (2.0 * kPi) - 0.5;
  }
};

// Bilinear sample with longitudinal wrap and latitude clamp at the poles.
double sample_erp_bilinear(const ErpGrid& g, int channel, double fi, double fj);

// Bilinear sample of a (non-wrapping) raster with edge clamp.
double sample_raster_bilinear(const Raster& r, int channel, double fi, double fj);

}  // namespace omnisal::geom
