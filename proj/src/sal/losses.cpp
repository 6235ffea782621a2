#include "omnisal/sal/losses.hpp"

#include <cmath>

#include "omnisal/common/error.hpp"

namespace omnisal::sal {

using namespace omnisal::ag;

namespace {

void check_shapes(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) throw ShapeError(std::string(op) + ": map shapes differ");
}

void check_loose_sum1(const Tensor& t, const char* op) {
  double s = 0.0;
  for (double v : t.values()) s += v;
  if (std::abs(s - 1.0) > 1e-4) {
    throw DataError(std::string(op) + ": input map is not sum-1 normalized");
  }
}

}  // namespace

Tensor kld_loss(const Tensor& a, const Tensor& b, const Tensor& weight, double eps) {
  check_shapes(a, b, "kld_loss");
  check_loose_sum1(a, "kld_loss");
  check_loose_sum1(b, "kld_loss");
  Tensor ratio = div(a, add_scalar(b, eps));
  Tensor terms = mul(a, log_op(add_scalar(ratio, eps)));
  if (weight.defined()) {
    check_shapes(a, weight, "kld_loss");
    for (double v : weight.values()) {
      if (v < 0.0) throw DataError("kld_loss: negative weight");
    }
    terms = mul(terms, weight);
  }
  return sum(terms);
}

Tensor cc_loss(const Tensor& a, const Tensor& b) {
  check_shapes(a, b, "cc_loss");
  const Tensor da = sub(a, mean(a));
  const Tensor db = sub(b, mean(b));
  const Tensor saa = sum(mul(da, da));
  const Tensor sbb = sum(mul(db, db));
  if (saa.item() == 0.0 || sbb.item() == 0.0) throw DataError("cc_loss: zero-variance input");
  return div(sum(mul(da, db)), sqrt_op(mul(saa, sbb)));
}

namespace {

Tensor minmax01(const Tensor& x, const char* op) {
  const Tensor lo = reduce_min(x);
  const Tensor hi = reduce_max(x);
  const Tensor span = sub(hi, lo);
  if (span.item() == 0.0) throw DataError(std::string(op) + ": constant map");
  return div(sub(x, lo), span);
}

}  // namespace

Tensor smse_loss(const Tensor& p, const Tensor& q, const Tensor& fix) {
  check_shapes(p, q, "smse_loss");
  check_shapes(p, fix, "smse_loss");
  double count = 0.0;
  for (double v : fix.values()) {
    if (v != 0.0 && v != 1.0) throw DataError("smse_loss: fixation map must be binary");
    count += v;
  }
  if (count == 0.0) throw DataError("smse_loss: fixation map has no fixations");
  const Tensor d = sub(minmax01(p, "smse_loss"), minmax01(q, "smse_loss"));
  return scale(sum(mul(mul(d, d), fix)), 1.0 / count);
}

Tensor supervised_loss(const Tensor& p, const Tensor& q_s, const Tensor& q_f) {
  const Tensor kld_term = kld_loss(q_s, p);
  const Tensor cc_term = sub(Tensor::scalar(1.0), cc_loss(p, q_s));
  const Tensor smse_term = smse_loss(p, q_s, q_f);
  return add(add(kld_term, cc_term), scale(smse_term, kSmseAlpha));
}

Tensor vac_loss(const Tensor& y_main, const Tensor& y_aug, const Tensor& weight, double eps) {
  check_shapes(y_main, y_aug, "vac_loss");
  const Tensor kld_term = kld_loss(y_main, y_aug, weight, eps);
  Tensor cross = mul(y_main, y_aug);
  if (weight.defined()) cross = mul(cross, weight);
  const Tensor denom = sqrt_op(mul(sum(mul(y_main, y_main)), sum(mul(y_aug, y_aug))));
  const Tensor cosine = div(sum(cross), denom);
  return add(kld_term, sub(Tensor::scalar(1.0), cosine));
}

}  // namespace omnisal::sal
