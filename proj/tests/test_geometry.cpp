#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "omnisal/common/rng.hpp"
#include "omnisal/geometry/image_io.hpp"
#include "omnisal/geometry/layout.hpp"
#include "omnisal/geometry/sampling_map.hpp"

using namespace omnisal;
using namespace omnisal::geom;

namespace {

// Smooth low-frequency test pattern with values in (0, 1).
double pattern(const SphericalCoord& c) {
  return 0.5 + 0.25 * std::cos(c.lat) * std::cos(c.lon) + 0.2 * std::sin(c.lat);
}

ErpGrid pattern_grid(int h, int channels = 1) {
  ErpGrid g(h, channels);
  for (int i = 0; i < g.height; ++i) {
    for (int j = 0; j < g.width; ++j) {
      const double v = pattern(g.pixel_center(i, j));
      for (int c = 0; c < channels; ++c) g.at(c, i, j) = v * (1.0 + 0.1 * c);
    }
  }
  return g;
}

// Independent membership oracle using the printed trig formulas rather than
// the 3D frame arithmetic of the builder.
int brute_force_coverage(const ViewportLayout& layout, const SphericalCoord& q) {
  const double r = layout.half_extent();
  int count = 0;
  for (const auto& c : layout.centers) {
    const double dl = q.lon - c.lon;
    const double cos_c = std::sin(c.lat) * std::sin(q.lat) +
                         std::cos(c.lat) * std::cos(q.lat) * std::cos(dl);
    if (cos_c <= 0.0) continue;
    const double x = std::cos(q.lat) * std::sin(dl) / cos_c;
    const double y = (std::cos(c.lat) * std::sin(q.lat) -
                      std::sin(c.lat) * std::cos(q.lat) * std::cos(dl)) / cos_c;
    if (std::abs(x) <= r && std::abs(y) <= r) ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("gnomonic projection of the tangency point is the origin") {
  const SphericalCoord c{0.3, -1.2};
  const PlanePoint p = gnomonic_forward(c, c);
  CHECK(p.x == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(p.y == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("gnomonic equator closed form: 10 deg east maps to (tan 10, 0)") {
  const PlanePoint p = gnomonic_forward({0.0, 0.0}, {0.0, deg_to_rad(10.0)});
  CHECK(p.x == doctest::Approx(std::tan(deg_to_rad(10.0))).epsilon(1e-14));
  CHECK(std::abs(p.y) < 1e-15);
}

TEST_CASE("gnomonic rejects points at or beyond 90 degrees") {
  CHECK_THROWS_AS(gnomonic_forward({0.0, 0.0}, {0.0, deg_to_rad(90.0)}), DataError);
  CHECK_THROWS_AS(gnomonic_forward({0.0, 0.0}, {0.0, deg_to_rad(135.0)}), DataError);
}

TEST_CASE("gnomonic forward/inverse round-trip on 1e4 random pairs") {
  Rng rng(7);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const SphericalCoord center{std::asin(uniform(rng, -1.0, 1.0)), uniform(rng, -kPi, kPi)};
    // Random target within 40 deg (fov/2 of the default layout).
    const double ang = uniform(rng, 0.0, deg_to_rad(40.0));
    const double dir = uniform(rng, 0.0, 2.0 * kPi);
    const PlanePoint offset{std::tan(ang) * std::cos(dir), std::tan(ang) * std::sin(dir)};
    const SphericalCoord q = gnomonic_inverse(center, offset);
    const PlanePoint p = gnomonic_forward(center, q);
    const SphericalCoord q2 = gnomonic_inverse(center, p);
    worst = std::max(worst, angular_distance(q, q2));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("default layout: 18 viewports, 4 latitude rings, fov 80, patch 224") {
  const ViewportLayout layout = default_layout();
  CHECK(layout.count() == 18);
  CHECK(layout.fov_deg == doctest::Approx(80.0));
  CHECK(layout.patch_size == 224);
  std::set<long long> lats;
  std::set<std::pair<long long, long long>> unique_centers;
  for (const auto& c : layout.centers) {
    CHECK(c.lat >= -kPi / 2.0);
    CHECK(c.lat <= kPi / 2.0);
    CHECK(c.lon >= -kPi);
    CHECK(c.lon < kPi);
    lats.insert(std::llround(rad_to_deg(c.lat) * 1e6));
    unique_centers.insert({std::llround(c.lat * 1e9), std::llround(c.lon * 1e9)});
  }
  CHECK(lats == std::set<long long>{-67500000, -22500000, 22500000, 67500000});
  CHECK(unique_centers.size() == 18);  // no duplicates
}

TEST_CASE("augmented layouts") {
  const ViewportLayout base = default_layout();
  SUBCASE("shifted moves every longitude by exactly +45 deg") {
    const ViewportLayout s = augmented_layout(AugmentKind::kShifted);
    REQUIRE(s.count() == base.count());
    CHECK(s.fov_deg == doctest::Approx(80.0));
    for (std::size_t i = 0; i < s.count(); ++i) {
      CHECK(s.centers[i].lat == doctest::Approx(base.centers[i].lat).epsilon(1e-12));
      const double dl = wrap_lon(s.centers[i].lon - base.centers[i].lon);
      CHECK(dl == doctest::Approx(deg_to_rad(45.0)).epsilon(1e-12));
    }
  }
  SUBCASE("wide_fov keeps centers, fov becomes 120") {
    const ViewportLayout w = augmented_layout(AugmentKind::kWideFov);
    REQUIRE(w.count() == base.count());
    CHECK(w.fov_deg == doctest::Approx(120.0));
    for (std::size_t i = 0; i < w.count(); ++i) {
      CHECK(w.centers[i].lat == doctest::Approx(base.centers[i].lat));
      CHECK(w.centers[i].lon == doctest::Approx(base.centers[i].lon));
    }
  }
  SUBCASE("coarse is 10 viewports in rings (3,4,3) at -60/0/+60") {
    const ViewportLayout c = augmented_layout(AugmentKind::kCoarse);
    CHECK(c.count() == 10);
    CHECK(c.fov_deg == doctest::Approx(120.0));
    int ring_counts[3] = {0, 0, 0};
    for (const auto& ctr : c.centers) {
      const double lat = rad_to_deg(ctr.lat);
      if (std::abs(lat + 60.0) < 1e-9) ++ring_counts[0];
      else if (std::abs(lat) < 1e-9) ++ring_counts[1];
      else if (std::abs(lat - 60.0) < 1e-9) ++ring_counts[2];
      else FAIL("unexpected latitude ", lat);
    }
    CHECK(ring_counts[0] == 3);
    CHECK(ring_counts[1] == 4);
    CHECK(ring_counts[2] == 3);
  }
}

TEST_CASE("layout JSON round-trip") {
  const ViewportLayout layout = augmented_layout(AugmentKind::kCoarse);
  const ViewportLayout back = layout_from_json(layout_to_json(layout));
  REQUIRE(back.count() == layout.count());
  CHECK(back.fov_deg == doctest::Approx(layout.fov_deg));
  CHECK(back.patch_size == layout.patch_size);
  for (std::size_t i = 0; i < layout.count(); ++i) {
    CHECK(back.centers[i].lat == doctest::Approx(layout.centers[i].lat).epsilon(1e-12));
    CHECK(back.centers[i].lon == doctest::Approx(layout.centers[i].lon).epsilon(1e-12));
  }
}

TEST_CASE("sampling map coverage equals the brute-force membership oracle") {
  for (const char* name : {"default", "coarse"}) {
    const ViewportLayout layout = layout_by_name(name);
    const int h = 64;
    const SamplingMap map = build_sampling_map(layout, h, 2 * h, 2);
    const ErpGrid probe(h, 1);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < 2 * h; ++j) {
        CHECK(map.coverage(i, j) == brute_force_coverage(layout, probe.pixel_center(i, j)));
      }
    }
  }
}

TEST_CASE("default layout at H=128: coverage max 4, no uncovered pixels") {
  const SamplingMap map = build_sampling_map(default_layout(), 128, 256, 2);
  int max_cov = 0, min_cov = 1 << 30;
  for (int i = 0; i < 128; ++i) {
    for (int j = 0; j < 256; ++j) {
      max_cov = std::max(max_cov, map.coverage(i, j));
      min_cov = std::min(min_cov, map.coverage(i, j));
    }
  }
  CHECK(max_cov == 4);
  CHECK(min_cov >= 1);
}

TEST_CASE("single viewport coverage values are only 0 or 1") {
  ViewportLayout layout;
  layout.centers = {{0.0, 0.0}};
  layout.fov_deg = 80.0;
  layout.patch_size = 32;
  const SamplingMap map = build_sampling_map(layout, 32, 64);
  for (int i = 0; i < 32; ++i) {
    for (int j = 0; j < 64; ++j) {
      CHECK((map.coverage(i, j) == 0 || map.coverage(i, j) == 1));
    }
  }
}

TEST_CASE("overlap mask: empty layout is all zeros, default matches coverage") {
  ViewportLayout empty;
  empty.fov_deg = 80.0;
  empty.patch_size = 8;
  const ErpGrid zeros = overlap_mask(empty, 16, 32);
  for (double v : zeros.data) CHECK(v == 0.0);

  const ViewportLayout layout = default_layout();
  const ErpGrid mask = overlap_mask(layout, 64, 128);
  const SamplingMap map = build_sampling_map(layout, 64, 128);
  double max_v = 0.0;
  for (int i = 0; i < 64; ++i) {
    for (int j = 0; j < 128; ++j) {
      CHECK(mask.at(0, i, j) == static_cast<double>(map.coverage(i, j)));
      max_v = std::max(max_v, mask.at(0, i, j));
    }
  }
  CHECK(max_v == 4.0);
}

TEST_CASE("projecting a constant ERP yields constant patches") {
  ViewportLayout layout = augmented_layout(AugmentKind::kCoarse);
  layout.patch_size = 16;
  const SamplingMap map = build_sampling_map(layout, 32, 64);
  ErpGrid erp(32, 2);
  std::fill(erp.data.begin(), erp.data.end(), 3.25);
  const auto patches = project_to_tangents(erp, map);
  REQUIRE(patches.size() == 10);
  for (const auto& patch : patches) {
    for (double v : patch.data) CHECK(v == doctest::Approx(3.25).epsilon(1e-15));
  }
}

TEST_CASE("default projection shapes: 18 patches of 224x224x3") {
  const ViewportLayout layout = default_layout();
  const SamplingMap map = build_sampling_map(layout, 128, 256, 4);
  const ErpGrid erp = pattern_grid(128, 3);
  const auto patches = project_to_tangents(erp, map, 4);
  REQUIRE(patches.size() == 18);
  for (const auto& patch : patches) {
    CHECK(patch.height == 224);
    CHECK(patch.width == 224);
    CHECK(patch.channels == 3);
  }
}

TEST_CASE("patch center approximates the ERP value at the viewport center") {
  const ViewportLayout layout = default_layout();
  const SamplingMap map = build_sampling_map(layout, 128, 256, 4);
  const ErpGrid erp = pattern_grid(128);
  const auto patches = project_to_tangents(erp, map, 4);
  for (std::size_t t = 0; t < layout.count(); ++t) {
    const double expect = pattern(layout.centers[t]);
    const double got = patches[t].at(0, layout.patch_size / 2, layout.patch_size / 2);
    CHECK(got == doctest::Approx(expect).epsilon(0.02));
  }
}

TEST_CASE("back-projection restores a constant exactly on covered pixels") {
  ViewportLayout layout = default_layout();
  layout.patch_size = 64;
  const SamplingMap map = build_sampling_map(layout, 64, 128);
  ErpGrid erp(64, 1);
  std::fill(erp.data.begin(), erp.data.end(), 0.75);
  const auto patches = project_to_tangents(erp, map);
  const auto [back, weight] = back_project(patches, map);
  for (int i = 0; i < 64; ++i) {
    for (int j = 0; j < 128; ++j) {
      if (weight.at(0, i, j) > 0.0) {
        CHECK(back.at(0, i, j) == doctest::Approx(0.75).epsilon(1e-14));
      } else {
        CHECK(back.at(0, i, j) == 0.0);
      }
      CHECK(weight.at(0, i, j) == static_cast<double>(map.coverage(i, j)));
    }
  }
}

TEST_CASE("round trip of a low-frequency pattern stays within 1% of range") {
  const ViewportLayout layout = default_layout();
  const SamplingMap map = build_sampling_map(layout, 128, 256, 4);
  const ErpGrid erp = pattern_grid(128);
  const auto patches = project_to_tangents(erp, map, 4);
  const auto [back, weight] = back_project(patches, map, 4);
  double lo = 1e300, hi = -1e300, err_sum = 0.0;
  for (double v : erp.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::size_t n = 0;
  for (int i = 0; i < 128; ++i) {
    for (int j = 0; j < 256; ++j) {
      REQUIRE(weight.at(0, i, j) > 0.0);
      err_sum += std::abs(back.at(0, i, j) - erp.at(0, i, j));
      ++n;
    }
  }
  CHECK(err_sum / static_cast<double>(n) < 0.01 * (hi - lo));
}

TEST_CASE("longitude wrap: pattern shifted by a full turn projects identically") {
  ViewportLayout layout = augmented_layout(AugmentKind::kCoarse);
  layout.patch_size = 24;
  const SamplingMap map = build_sampling_map(layout, 48, 96);
  ErpGrid a(48, 1), b(48, 1);
  for (int i = 0; i < 48; ++i) {
    for (int j = 0; j < 96; ++j) {
      const SphericalCoord c = a.pixel_center(i, j);
      a.at(0, i, j) = pattern(c);
      b.at(0, i, j) = pattern({c.lat, c.lon + 2.0 * kPi});
    }
  }
  const auto pa = project_to_tangents(a, map);
  const auto pb = project_to_tangents(b, map);
  for (std::size_t t = 0; t < pa.size(); ++t) {
    for (std::size_t k = 0; k < pa[t].data.size(); ++k) {
      CHECK(pa[t].data[k] == doctest::Approx(pb[t].data[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("rotational covariance under a pixel-pitch longitude shift") {
  ViewportLayout layout = default_layout();
  layout.patch_size = 32;
  const int h = 64, w = 128, shift_cols = 4;
  const double dlon = 2.0 * kPi * shift_cols / w;
  const ErpGrid erp = pattern_grid(h);
  ErpGrid rotated(h, 1);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      rotated.at(0, i, (j + shift_cols) % w) = erp.at(0, i, j);
    }
  }
  ViewportLayout shifted = layout;
  for (auto& c : shifted.centers) c = canonical({c.lat, c.lon + dlon});
  const auto pa = project_to_tangents(erp, build_sampling_map(layout, h, w));
  const auto pb = project_to_tangents(rotated, build_sampling_map(shifted, h, w));
  for (std::size_t t = 0; t < pa.size(); ++t) {
    for (std::size_t k = 0; k < pa[t].data.size(); ++k) {
      CHECK(pa[t].data[k] == doctest::Approx(pb[t].data[k]).epsilon(1e-9));
    }
  }
}

TEST_CASE("linear operators reproduce plain projection and back-projection") {
  ViewportLayout layout = augmented_layout(AugmentKind::kCoarse);
  layout.patch_size = 20;
  const int h = 40;
  const SamplingMap map = build_sampling_map(layout, h, 2 * h);
  const ErpGrid erp = pattern_grid(h);
  const auto patches = project_to_tangents(erp, map);

  const auto proj = projection_operator(map);
  const std::vector<double> flat = proj->apply(erp.data);
  std::size_t k = 0;
  for (const auto& patch : patches) {
    for (double v : patch.data) {
      CHECK(flat[k] == doctest::Approx(v).epsilon(1e-12));
      ++k;
    }
  }

  const auto backop = backprojection_operator(map);
  const std::vector<double> back_flat = backop->apply(flat);
  const auto [back, weight] = back_project(patches, map);
  for (std::size_t i = 0; i < back.data.size(); ++i) {
    CHECK(back_flat[i] == doctest::Approx(back.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("cosine-weighted blending also restores constants") {
  ViewportLayout layout = augmented_layout(AugmentKind::kCoarse);
  layout.patch_size = 16;
  const SamplingMap map = build_sampling_map(layout, 32, 64);
  ErpGrid erp(32, 1);
  std::fill(erp.data.begin(), erp.data.end(), 1.5);
  const auto patches = project_to_tangents(erp, map);
  const auto [back, weight] = back_project(patches, map, 1, BlendMode::kCosineWeighted);
  for (int i = 0; i < 32; ++i) {
    for (int j = 0; j < 64; ++j) {
      if (weight.at(0, i, j) > 0.0) CHECK(back.at(0, i, j) == doctest::Approx(1.5).epsilon(1e-12));
    }
  }
}

TEST_CASE("PFM round-trip preserves float values exactly") {
  Raster r(5, 9, 3);
  Rng rng(3);
  for (double& v : r.data) v = static_cast<float>(normal(rng, 0.0, 10.0));
  const std::string path = "test_io_roundtrip.pfm";
  write_pfm(path, r);
  const Raster back = read_pfm(path);
  REQUIRE(back.height == 5);
  REQUIRE(back.width == 9);
  REQUIRE(back.channels == 3);
  for (std::size_t i = 0; i < r.data.size(); ++i) CHECK(back.data[i] == r.data[i]);
  std::remove(path.c_str());
}

TEST_CASE("PNG round-trip preserves 8-bit data") {
  Raster r(7, 11, 3);
  Rng rng(4);
  for (double& v : r.data) v = static_cast<double>(uniform_int(rng, 0, 255));
  const std::string path = "test_io_roundtrip.png";
  write_png(path, r);
  const Raster back = read_png(path);
  REQUIRE(back.height == 7);
  REQUIRE(back.width == 11);
  REQUIRE(back.channels == 3);
  for (std::size_t i = 0; i < r.data.size(); ++i) CHECK(back.data[i] == r.data[i]);
  std::remove(path.c_str());
}

TEST_CASE("ErpGrid rejects rasters that are not 2:1") {
  CHECK_THROWS_AS(ErpGrid::from_raster(Raster(4, 9, 1)), DataError);
}
