#include "omnisal/gaze/gaze.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "omnisal/sal/metrics.hpp"

namespace omnisal::gaze {

using geom::SphericalCoord;
using geom::Vec3;

namespace {

SphericalCoord centroid_of(const std::vector<Vec3>& units, std::size_t lo, std::size_t hi) {
  Vec3 acc;
  for (std::size_t k = lo; k < hi; ++k) {
    acc.x += units[k].x;
    acc.y += units[k].y;
    acc.z += units[k].z;
  }
  return geom::to_spherical(acc);
}

}  // namespace

std::vector<Fixation> idt_fixations(const std::vector<GazeSample>& trace, const IdtParams& params) {
  for (std::size_t k = 1; k < trace.size(); ++k) {
    if (trace[k].timestamp <= trace[k - 1].timestamp) {
      throw DataError("idt_fixations: trace timestamps must be strictly increasing");
    }
  }
  const double threshold = geom::deg_to_rad(params.max_dispersion_deg);
  std::vector<Vec3> units(trace.size());
  for (std::size_t k = 0; k < trace.size(); ++k) units[k] = geom::to_unit(trace[k].direction);

  std::vector<Fixation> out;
  std::size_t i = 0;
  const std::size_t n = trace.size();
  while (i < n) {
    // Smallest window starting at i that spans the minimum duration.
    std::size_t j = i;
    while (j < n && trace[j].timestamp - trace[i].timestamp < params.min_duration_s) ++j;
    if (j == n) break;  // tail too short for a fixation

    // Incremental max pairwise angle over the window.
    double dispersion = 0.0;
    bool ok = true;
    for (std::size_t k = i; k <= j && ok; ++k) {
      for (std::size_t m = i; m < k; ++m) {
        dispersion = std::max(dispersion,
                              geom::angular_distance(trace[k].direction, trace[m].direction));
        if (dispersion > threshold) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) {
      ++i;
      continue;
    }
    // Grow while the next sample keeps the window inside the threshold.
    while (j + 1 < n) {
      double grown = dispersion;
      for (std::size_t m = i; m <= j; ++m) {
        grown = std::max(grown, geom::angular_distance(trace[j + 1].direction, trace[m].direction));
        if (grown > threshold) break;
      }
      if (grown > threshold) break;
      dispersion = grown;
      ++j;
    }
    out.push_back({trace[i].timestamp, trace[j].timestamp - trace[i].timestamp,
                   centroid_of(units, i, j + 1)});
    i = j + 1;
  }
  return out;
}

geom::ErpGrid density_map(const std::vector<Fixation>& fixations, int erp_height, int erp_width,
                          double sigma_deg) {
  if (erp_width != 2 * erp_height) throw DataError("density_map: W must equal 2H");
  if (fixations.empty()) throw DataError("density_map: no fixations");
  if (sigma_deg <= 0.0) throw DataError("density_map: sigma must be positive");
  const double sigma = geom::deg_to_rad(sigma_deg);
  geom::ErpGrid map(erp_height, 1);
  std::vector<Vec3> dirs(fixations.size());
  for (std::size_t k = 0; k < fixations.size(); ++k) dirs[k] = geom::to_unit(fixations[k].centroid);
  for (int i = 0; i < erp_height; ++i) {
    for (int j = 0; j < erp_width; ++j) {
      const Vec3 d = geom::to_unit(map.pixel_center(i, j));
      double acc = 0.0;
      for (const Vec3& f : dirs) {
        const Vec3 cr{d.y * f.z - d.z * f.y, d.z * f.x - d.x * f.z, d.x * f.y - d.y * f.x};
        const double s = std::sqrt(cr.x * cr.x + cr.y * cr.y + cr.z * cr.z);
        const double gamma = std::atan2(s, geom::dot(d, f));
        acc += std::exp(-gamma * gamma / (2.0 * sigma * sigma));
      }
      map.at(0, i, j) = acc;
    }
  }
  sal::normalize_sum1(map);
  return map;
}

geom::ErpGrid fixation_map(const std::vector<Fixation>& fixations, int erp_height, int erp_width) {
  if (erp_width != 2 * erp_height) throw DataError("fixation_map: W must equal 2H");
  geom::ErpGrid map(erp_height, 1);
  for (const auto& f : fixations) {
    const SphericalCoord c = geom::canonical(f.centroid);
    int i = static_cast<int>(std::floor((geom::kPi / 2.0 - c.lat) * erp_height / geom::kPi));
    int j = static_cast<int>(std::floor((c.lon + geom::kPi) * erp_width / (2.0 * geom::kPi)));
    i = std::clamp(i, 0, erp_height - 1);
    j = ((j % erp_width) + erp_width) % erp_width;
    map.at(0, i, j) = 1.0;
  }
  return map;
}

std::vector<WindowScore> inter_subject_consistency(
    const std::vector<std::vector<Fixation>>& per_subject, int erp_height, int erp_width,
    double window_s, double sigma_deg) {
  if (per_subject.size() < 3) {
    throw DataError("inter_subject_consistency: need at least 3 subjects");
  }
  if (window_s <= 0.0) throw DataError("inter_subject_consistency: bad window length");
  double t_max = 0.0;
  for (const auto& subj : per_subject) {
    for (const auto& f : subj) t_max = std::max(t_max, f.start);
  }
  const int windows = static_cast<int>(std::floor(t_max / window_s)) + 1;

  std::vector<WindowScore> out;
  for (int w = 0; w < windows; ++w) {
    const double lo = w * window_s, hi = (w + 1) * window_s;
    // Fixations are assigned to the window containing their start time.
    std::vector<std::vector<Fixation>> in_window(per_subject.size());
    for (std::size_t s = 0; s < per_subject.size(); ++s) {
      for (const auto& f : per_subject[s]) {
        if (f.start >= lo && f.start < hi) in_window[s].push_back(f);
      }
    }
    double acc = 0.0;
    int used = 0;
    for (std::size_t s = 0; s < per_subject.size(); ++s) {
      if (in_window[s].empty()) continue;
      std::vector<Fixation> pooled;
      for (std::size_t o = 0; o < per_subject.size(); ++o) {
        if (o != s) pooled.insert(pooled.end(), in_window[o].begin(), in_window[o].end());
      }
      if (pooled.empty()) continue;
      const geom::ErpGrid own = density_map(in_window[s], erp_height, erp_width, sigma_deg);
      const geom::ErpGrid rest = density_map(pooled, erp_height, erp_width, sigma_deg);
      acc += sal::cc(own, rest);
      ++used;
    }
    if (used >= 2) out.push_back({lo, acc / used, used});
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

bool numeric_token(const std::string& s) {
  try {
    std::size_t pos = 0;
    (void)std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

}  // namespace

std::vector<GazeSample> read_gaze_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open: " + path);
  std::vector<GazeSample> out;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (first && !fields.empty() && !numeric_token(fields[0])) {
      first = false;  // header row
      continue;
    }
    first = false;
    if (fields.size() != 3) throw DataError("bad gaze CSV row in " + path + ": " + line);
    GazeSample s;
    s.timestamp = std::stod(fields[0]);
    s.direction = geom::canonical(
        {geom::deg_to_rad(std::stod(fields[1])), geom::deg_to_rad(std::stod(fields[2]))});
    out.push_back(s);
  }
  return out;
}

void write_fixation_csv(const std::string& path, const std::string& subject_id,
                        const std::vector<Fixation>& fixations) {
  std::ofstream f(path, std::ios::binary);  // binary keeps LF line ends
  if (!f) throw DataError("cannot open for writing: " + path);
  f << "subject_id,start_s,duration_s,lat_deg,lon_deg\n";
  char buf[256];
  for (const auto& fx : fixations) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.9f,%.9f\n", subject_id.c_str(), fx.start,
                  fx.duration, geom::rad_to_deg(fx.centroid.lat), geom::rad_to_deg(fx.centroid.lon));
    f << buf;
  }
}

std::vector<std::pair<std::string, Fixation>> read_fixation_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open: " + path);
  std::vector<std::pair<std::string, Fixation>> out;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (first && fields.size() >= 2 && !numeric_token(fields[1])) {
      first = false;
      continue;
    }
    first = false;
    if (fields.size() != 5) throw DataError("bad fixation CSV row in " + path + ": " + line);
    Fixation fx;
    fx.start = std::stod(fields[1]);
    fx.duration = std::stod(fields[2]);
    fx.centroid = geom::canonical(
        {geom::deg_to_rad(std::stod(fields[3])), geom::deg_to_rad(std::stod(fields[4]))});
    out.emplace_back(fields[0], fx);
  }
  return out;
}

}  // namespace omnisal::gaze
