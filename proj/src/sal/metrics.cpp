#include "omnisal/sal/metrics.hpp"

#include <cmath>

namespace omnisal::sal {

namespace {

void check_same_shape(const geom::Raster& a, const geom::Raster& b, const char* op) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels) {
    throw ShapeError(std::string(op) + ": map shapes differ");
  }
}

void check_saliency(const geom::Raster& m, const char* op) {
  if (m.channels != 1) throw ShapeError(std::string(op) + ": saliency maps are 1-channel");
  for (double v : m.data) {
    if (v < 0.0) throw DataError(std::string(op) + ": negative saliency value");
  }
}

}  // namespace

void normalize_sum1(geom::Raster& map) {
  double s = 0.0;
  for (double v : map.data) s += v;
  if (s <= 0.0) throw DataError("normalize_sum1: map has no mass");
  for (double& v : map.data) v /= s;
}

bool is_sum1(const geom::Raster& map, double tol) {
  double s = 0.0;
  for (double v : map.data) s += v;
  return std::abs(s - 1.0) <= tol;
}

void check_fixation_map(const geom::Raster& fix) {
  bool any = false;
  for (double v : fix.data) {
    if (v != 0.0 && v != 1.0) throw DataError("fixation map must be binary");
    any = any || v == 1.0;
  }
  if (!any) throw DataError("fixation map has no fixations");
}

double kld(const geom::Raster& a, const geom::Raster& b, double eps) {
  check_same_shape(a, b, "kld");
  check_saliency(a, "kld");
  check_saliency(b, "kld");
  if (!is_sum1(a) || !is_sum1(b)) throw DataError("kld: inputs must be sum-1 normalized");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    acc += a.data[i] * std::log(eps + a.data[i] / (b.data[i] + eps));
  }
  return acc;
}

double cc(const geom::Raster& a, const geom::Raster& b) {
  check_same_shape(a, b, "cc");
  const std::size_t n = a.data.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a.data[i];
    mb += b.data[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a.data[i] - ma, db = b.data[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw DataError("cc: zero-variance input");
  return sab / std::sqrt(saa * sbb);
}

double sim(const geom::Raster& a, const geom::Raster& b) {
  check_same_shape(a, b, "sim");
  check_saliency(a, "sim");
  check_saliency(b, "sim");
  if (!is_sum1(a) || !is_sum1(b)) throw DataError("sim: inputs must be sum-1 normalized");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) acc += std::min(a.data[i], b.data[i]);
  return acc;
}

double nss(const geom::Raster& p, const geom::Raster& fix) {
  check_same_shape(p, fix, "nss");
  check_fixation_map(fix);
  const std::size_t n = p.data.size();
  double mu = 0.0;
  for (double v : p.data) mu += v;
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (double v : p.data) var += (v - mu) * (v - mu);
  var /= static_cast<double>(n);
  if (var == 0.0) return 0.0;  // constant-map convention
  const double sigma = std::sqrt(var);
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (fix.data[i] == 1.0) {
      acc += (p.data[i] - mu) / sigma;
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

namespace {

std::vector<double> minmax_normalized(const geom::Raster& m, const char* op) {
  double lo = m.data[0], hi = m.data[0];
  for (double v : m.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) throw DataError(std::string(op) + ": constant map cannot be min-max normalized");
  std::vector<double> out(m.data.size());
  for (std::size_t i = 0; i < m.data.size(); ++i) out[i] = (m.data[i] - lo) / (hi - lo);
  return out;
}

}  // namespace

double smse(const geom::Raster& p, const geom::Raster& q, const geom::Raster& fix) {
  check_same_shape(p, q, "smse");
  check_same_shape(p, fix, "smse");
  check_fixation_map(fix);
  const std::vector<double> pn = minmax_normalized(p, "smse");
  const std::vector<double> qn = minmax_normalized(q, "smse");
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pn.size(); ++i) {
    if (fix.data[i] == 1.0) {
      const double d = pn[i] - qn[i];
      acc += d * d;
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

}  // namespace omnisal::sal
