#include "omnisal/geometry/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <vector>

namespace omnisal::geom {

namespace {

bool little_endian_host() {
  const std::uint16_t probe = 1;
  return *reinterpret_cast<const std::uint8_t*>(&probe) == 1;
}

std::string next_token(std::istream& in) {
  std::string tok;
  in >> tok;
  if (!in) throw DataError("PFM: truncated header");
  return tok;
}

}  // namespace

void write_pfm(const std::string& path, const Raster& r) {
  if (r.channels != 1 && r.channels != 3) {
    throw DataError("PFM supports 1 or 3 channels, got " + std::to_string(r.channels));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << (r.channels == 1 ? "Pf" : "PF") << "\n" << r.width << " " << r.height << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(r.width) * r.channels);
  for (int i = r.height - 1; i >= 0; --i) {  // bottom-to-top
    for (int j = 0; j < r.width; ++j) {
      for (int c = 0; c < r.channels; ++c) {
        row[static_cast<std::size_t>(j) * r.channels + c] = static_cast<float>(r.at(c, i, j));
      }
    }
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!f) throw DataError("write failed: " + path);
}

Raster read_pfm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path);
  const std::string magic = next_token(f);
  int channels;
  if (magic == "Pf") channels = 1;
  else if (magic == "PF") channels = 3;
  else throw DataError("not a PFM file: " + path);
  const int width = std::stoi(next_token(f));
  const int height = std::stoi(next_token(f));
  const double scale = std::stod(next_token(f));
  if (width <= 0 || height <= 0) throw DataError("PFM: bad dimensions in " + path);
  f.get();  // single whitespace byte after the scale line
  const bool file_le = scale < 0.0;
  if (file_le != little_endian_host()) {
    throw DataError("PFM: byte order of " + path + " does not match this host");
  }
  Raster r(height, width, channels);
  std::vector<float> row(static_cast<std::size_t>(width) * channels);
  for (int i = height - 1; i >= 0; --i) {
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!f) throw DataError("PFM: truncated data in " + path);
    for (int j = 0; j < width; ++j) {
      for (int c = 0; c < channels; ++c) {
        r.at(c, i, j) = static_cast<double>(row[static_cast<std::size_t>(j) * channels + c]);
      }
    }
  }
  return r;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::string& path, const Raster& r) {
  if (r.channels != 1 && r.channels != 3) {
    throw DataError("PNG writer supports 1 or 3 channels, got " + std::to_string(r.channels));
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG write error: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(r.width), static_cast<png_uint_32>(r.height), 8,
               r.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(r.width) * r.channels);
  for (int i = 0; i < r.height; ++i) {
    for (int j = 0; j < r.width; ++j) {
      for (int c = 0; c < r.channels; ++c) {
        const double v = std::clamp(r.at(c, i, j), 0.0, 255.0);
        row[static_cast<std::size_t>(j) * r.channels + c] =
            static_cast<png_byte>(std::lround(v));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Raster read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open: " + path);
  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8)) {
    throw DataError("not a PNG file: " + path);
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("PNG read error: " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  // Normalize to 8-bit gray or RGB regardless of the stored variant.
  png_set_strip_16(png);
  png_set_packing(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int channels = static_cast<int>(png_get_channels(png, info));
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("PNG: unsupported channel count after normalization");
  }
  Raster r(height, width, channels);
  std::vector<png_byte> row(static_cast<std::size_t>(width) * channels);
  for (int i = 0; i < height; ++i) {
    png_read_row(png, row.data(), nullptr);
    for (int j = 0; j < width; ++j) {
      for (int c = 0; c < channels; ++c) {
        r.at(c, i, j) = static_cast<double>(row[static_cast<std::size_t>(j) * channels + c]);
      }
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return r;
}

void write_png_autoscale(const std::string& path, const Raster& r) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : r.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Raster scaled = r;
  const double span = hi - lo;
  for (double& v : scaled.data) v = span > 0.0 ? (v - lo) / span * 255.0 : 0.0;
  write_png(path, scaled);
}

ErpGrid read_erp_pfm(const std::string& path) { return ErpGrid::from_raster(read_pfm(path)); }
ErpGrid read_erp_png(const std::string& path) { return ErpGrid::from_raster(read_png(path)); }

ErpGrid read_erp_image(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".pfm") return read_erp_pfm(path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".png") return read_erp_png(path);
  throw DataError("unsupported image extension (want .pfm or .png): " + path);
}

}  // namespace omnisal::geom
