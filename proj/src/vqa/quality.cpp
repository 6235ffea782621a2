#include "omnisal/vqa/quality.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace omnisal::vqa {

namespace {

void check_pair(const geom::ErpGrid& a, const geom::ErpGrid& b, const char* what) {
  if (a.height != b.height || a.width != b.width) {
    throw ShapeError(std::string("vqa: ") + what + " dimensions differ");
  }
  if (a.channels != 1 || b.channels != 1) {
    throw DataError(std::string("vqa: ") + what + " must be single-channel luma");
  }
}

double weighted_psnr_impl(const geom::ErpGrid& ref, const geom::ErpGrid& imp,
                          const geom::ErpGrid& sal, double y_max, bool latitude_weight) {
  check_pair(ref, imp, "frame");
  check_pair(ref, sal, "frame/saliency");
  double wsum = 0.0, esum = 0.0;
  for (int i = 0; i < ref.height; ++i) {
    const double lat = geom::kPi / 2.0 - geom::kPi * (i + 0.5) / ref.height;
    const double cos_lat = latitude_weight ? std::cos(lat) : 1.0;
    for (int j = 0; j < ref.width; ++j) {
      const double w = sal.at(0, i, j) * cos_lat;
      if (w < 0.0) throw DataError("vqa: negative saliency weight");
      const double d = ref.at(0, i, j) - imp.at(0, i, j);
      wsum += w;
      esum += d * d * w;
    }
  }
  if (wsum == 0.0) throw DataError("vqa: all-zero saliency weights");
  if (esum == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(y_max * y_max * wsum / esum);
}

}  // namespace

double weighted_psnr(const geom::ErpGrid& reference, const geom::ErpGrid& impaired,
                     const geom::ErpGrid& saliency, double y_max) {
  return weighted_psnr_impl(reference, impaired, saliency, y_max, false);
}

double weighted_ws_psnr(const geom::ErpGrid& reference, const geom::ErpGrid& impaired,
                        const geom::ErpGrid& saliency, double y_max) {
  return weighted_psnr_impl(reference, impaired, saliency, y_max, true);
}

VideoScores score_video(const std::vector<geom::ErpGrid>& reference,
                        const std::vector<geom::ErpGrid>& impaired,
                        const std::vector<geom::ErpGrid>& saliency) {
  if (reference.size() != impaired.size() || reference.size() != saliency.size()) {
    throw DataError("vqa: frame counts differ");
  }
  if (reference.empty()) throw DataError("vqa: no frames");
  VideoScores out;
  double acc_p = 0.0, acc_w = 0.0;
  for (std::size_t f = 0; f < reference.size(); ++f) {
    const double p = weighted_psnr(reference[f], impaired[f], saliency[f]);
    const double w = weighted_ws_psnr(reference[f], impaired[f], saliency[f]);
    out.per_frame_wpsnr.push_back(p);
    out.per_frame_wwspsnr.push_back(w);
    acc_p += p;
    acc_w += w;
  }
  out.mean_wpsnr = acc_p / static_cast<double>(reference.size());
  out.mean_wwspsnr = acc_w / static_cast<double>(reference.size());
  return out;
}

std::string psnr_to_string(double db) {
  if (std::isinf(db)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", db);
  return buf;
}

double pcc(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DataError("pcc: length mismatch");
  if (x.empty()) throw DataError("pcc: empty input");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("pcc: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double srcc(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DataError("srcc: length mismatch");
  return pcc(average_ranks(x), average_ranks(y));
}

double rmse(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DataError("rmse: length mismatch");
  if (x.empty()) throw DataError("rmse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace omnisal::vqa
