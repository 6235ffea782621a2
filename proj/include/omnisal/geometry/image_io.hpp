#pragma once

#include <string>

#include "omnisal/geometry/erp_grid.hpp"

namespace omnisal::geom {

// PFM (portable float map): "Pf" for 1 channel, "PF" for 3; little-endian
// (negative scale), rows stored bottom-to-top per the format convention.
void write_pfm(const std::string& path, const Raster& r);
Raster read_pfm(const std::string& path);

// 8-bit PNG, grayscale or RGB. Values are in display range [0, 255]; writes
// clamp, reads return the stored bytes as doubles.
void write_png(const std::string& path, const Raster& r);
Raster read_png(const std::string& path);

// Min-max scales to [0, 255] before writing; for quick visual inspection.
void write_png_autoscale(const std::string& path, const Raster& r);

ErpGrid read_erp_pfm(const std::string& path);
ErpGrid read_erp_png(const std::string& path);
// Dispatch on extension (.pfm exact, .png 8-bit).
ErpGrid read_erp_image(const std::string& path);

}  // namespace omnisal::geom
