#include "omnisal/geometry/erp_grid.hpp"

#include <algorithm>
#include <cmath>

namespace omnisal::geom {

namespace {

inline int clamp_row(int i, int h) { return std::clamp(i, 0, h - 1); }

inline int wrap_col(int j, int w) {
  int r = j % w;
  if (r < 0) r += w;
  return r;
}

}  // namespace

double sample_erp_bilinear(const ErpGrid& g, int channel, double fi, double fj) {
  const int i0 = static_cast<int>(std::floor(fi));
  const int j0 = static_cast<int>(std::floor(fj));
  const double a = fi - i0;
  const double b = fj - j0;
  const int r0 = clamp_row(i0, g.height), r1 = clamp_row(i0 + 1, g.height);
  const int c0 = wrap_col(j0, g.width), c1 = wrap_col(j0 + 1, g.width);
  return (1.0 - a) * (1.0 - b) * g.at(channel, r0, c0) +
         (1.0 - a) * b * g.at(channel, r0, c1) +
         a * (1.0 - b) * g.at(channel, r1, c0) +
         a * b * g.at(channel, r1, c1);
}

double sample_raster_bilinear(const Raster& r, int channel, double fi, double fj) {
  const int i0 = static_cast<int>(std::floor(fi));
  const int j0 = static_cast<int>(std::floor(fj));
  const double a = fi - i0;
  const double b = fj - j0;
  const int r0 = std::clamp(i0, 0, r.height - 1), r1 = std::clamp(i0 + 1, 0, r.height - 1);
  const int c0 = std::clamp(j0, 0, r.width - 1), c1 = std::clamp(j0 + 1, 0, r.width - 1);
  return (1.0 - a) * (1.0 - b) * r.at(channel, r0, c0) +
         (1.0 - a) * b * r.at(channel, r0, c1) +
         a * (1.0 - b) * r.at(channel, r1, c0) +
         a * b * r.at(channel, r1, c1);
}

}  // namespace omnisal::geom
