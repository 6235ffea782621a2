#include "omnisal/geometry/layout.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "omnisal/common/error.hpp"

namespace omnisal::geom {

using nlohmann::json;

ViewportLayout rings_layout(const std::vector<Ring>& rings, double fov_deg, int patch_size) {
  if (fov_deg <= 0.0 || fov_deg >= 180.0) throw DataError("layout: fov must be in (0, 180)");
  if (patch_size < 1) throw DataError("layout: patch size must be positive");
  ViewportLayout layout;
  layout.fov_deg = fov_deg;
  layout.patch_size = patch_size;
  for (const auto& ring : rings) {
    if (ring.count < 1) throw DataError("layout: empty ring");
    for (int k = 0; k < ring.count; ++k) {
      const double lon_deg = 360.0 * k / ring.count;
      layout.centers.push_back(canonical({deg_to_rad(ring.lat_deg), deg_to_rad(lon_deg)}));
    }
  }
  return layout;
}

ViewportLayout default_layout() {
  // 18 viewports at four latitudes. Ring sizes (3, 6, 6, 3) keep the
  // overlap count at <= 4 everywhere; (4, 5, 5, 4) rings unavoidably stack
  // five viewports near |lat| 56 for any longitude phase.
  return rings_layout({{-67.5, 3}, {-22.5, 6}, {22.5, 6}, {67.5, 3}}, 80.0, 224);
}

ViewportLayout augmented_layout(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::kShifted: {
      ViewportLayout layout = default_layout();
      for (auto& c : layout.centers) c = canonical({c.lat, c.lon + deg_to_rad(45.0)});
      return layout;
    }
    case AugmentKind::kWideFov: {
      ViewportLayout layout = default_layout();
      layout.fov_deg = 120.0;
      return layout;
    }
    case AugmentKind::kCoarse:
      return rings_layout({{-60.0, 3}, {0.0, 4}, {60.0, 3}}, 120.0, 224);
  }
  throw DataError("augmented_layout: unknown kind");
}

AugmentKind parse_augment_kind(const std::string& name) {
  if (name == "shifted") return AugmentKind::kShifted;
  if (name == "wide-fov" || name == "wide_fov") return AugmentKind::kWideFov;
  if (name == "coarse") return AugmentKind::kCoarse;
  throw DataError("unknown layout augmentation: " + name);
}

ViewportLayout layout_by_name(const std::string& name) {
  if (name == "default") return default_layout();
  return augmented_layout(parse_augment_kind(name));
}

std::string layout_to_json(const ViewportLayout& layout) {
  json centers = json::array();
  for (const auto& c : layout.centers) {
    centers.push_back({rad_to_deg(c.lat), rad_to_deg(c.lon)});
  }
  json j;
  j["centers_deg"] = centers;
  j["fov_deg"] = layout.fov_deg;
  j["patch_size"] = layout.patch_size;
  return j.dump(2);
}

ViewportLayout layout_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("bad layout JSON: ") + e.what());
  }
  ViewportLayout layout;
  layout.fov_deg = j.at("fov_deg").get<double>();
  layout.patch_size = j.at("patch_size").get<int>();
  if (layout.fov_deg <= 0.0 || layout.fov_deg >= 180.0) throw DataError("layout: fov out of range");
  if (layout.patch_size < 1) throw DataError("layout: bad patch size");
  for (const auto& c : j.at("centers_deg")) {
    if (!c.is_array() || c.size() != 2) throw DataError("layout: centers_deg entries must be [lat, lon]");
    layout.centers.push_back(canonical({deg_to_rad(c[0].get<double>()), deg_to_rad(c[1].get<double>())}));
  }
  if (layout.centers.empty()) throw DataError("layout: no centers");
  return layout;
}

ViewportLayout load_layout_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open layout file: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return layout_from_json(buf.str());
}

void save_layout_file(const ViewportLayout& layout, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << layout_to_json(layout) << "\n";
}

}  // namespace omnisal::geom
