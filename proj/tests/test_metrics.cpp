#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "omnisal/common/rng.hpp"
#include "omnisal/sal/losses.hpp"
#include "omnisal/sal/metrics.hpp"
#include "omnisal/tensor/gradcheck.hpp"

using namespace omnisal;
using namespace omnisal::sal;
using geom::Raster;
using ag::Tensor;

namespace {

Raster random_salmap(Rng& rng, int h, int w) {
  Raster m(h, w, 1);
  for (double& v : m.data) v = uniform(rng, 0.05, 1.0);
  normalize_sum1(m);
  return m;
}

Raster map_of(int h, int w, std::vector<double> vals) {
  Raster m(h, w, 1);
  m.data = std::move(vals);
  return m;
}

Tensor tensor_of(const Raster& m, bool requires_grad = false) {
  return Tensor::from_data({m.data.size()}, m.data, requires_grad);
}

}  // namespace

TEST_CASE("kld self-divergence is bounded by the epsilon floor") {
  // kld(P, P) is ~ -eps * (n - 1): at most 1e-6 from above, and never below
  // the eps-induced floor of -eps * #pixels.
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const Raster p = random_salmap(rng, 6, 12);
    const double v = kld(p, p);
    CHECK(v <= 1e-6);
    CHECK(v >= -1e-7 * static_cast<double>(p.data.size()));
  }
}

TEST_CASE("kld two-term hand summation oracle") {
  const Raster a = map_of(1, 2, {0.7, 0.3});
  const Raster b = map_of(1, 2, {0.5, 0.5});
  const double eps = 1e-7;
  const double expect = 0.7 * std::log(eps + 0.7 / (0.5 + eps)) +
                        0.3 * std::log(eps + 0.3 / (0.5 + eps));
  CHECK(kld(a, b) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(kld(a, b) > 0.0);
}

TEST_CASE("kld of uniform vs uniform is ~0 and non-normalized inputs throw") {
  const int n = 32;
  Raster u(4, 8, 1);
  std::fill(u.data.begin(), u.data.end(), 1.0 / n);
  CHECK(kld(u, u) <= 1e-6);
  CHECK(kld(u, u) >= -1e-7 * n);
  Raster bad(4, 8, 1);
  std::fill(bad.data.begin(), bad.data.end(), 0.5);
  CHECK_THROWS_AS(kld(u, bad), DataError);
}

TEST_CASE("kld is never significantly negative") {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const Raster a = random_salmap(rng, 4, 8);
    const Raster b = random_salmap(rng, 4, 8);
    CHECK(kld(a, b) >= -1e-7 * 32);
  }
}

TEST_CASE("cc identities: self-correlation 1, affine invariance, symmetry") {
  Rng rng(3);
  const Raster p = random_salmap(rng, 5, 10);
  CHECK(cc(p, p) == doctest::Approx(1.0).epsilon(1e-12));
  Raster q = p;
  for (double& v : q.data) v = 3.7 * v + 0.2;
  CHECK(cc(p, q) == doctest::Approx(1.0).epsilon(1e-12));
  const Raster r = random_salmap(rng, 5, 10);
  CHECK(cc(p, r) == doctest::Approx(cc(r, p)).epsilon(1e-12));
  CHECK(cc(p, r) >= -1.0);
  CHECK(cc(p, r) <= 1.0);
}

TEST_CASE("cc four-pixel hand computation") {
  const Raster a = map_of(2, 2, {1.0, 2.0, 3.0, 4.0});
  const Raster b = map_of(2, 2, {2.0, 1.0, 5.0, 4.0});
  // Centered: a-2.5 = {-1.5,-0.5,0.5,1.5}; b-3 = {-1,-2,2,1}.
  // sab = 1.5+1+1+1.5 = 5; saa = 5; sbb = 10.
  CHECK(cc(a, b) == doctest::Approx(5.0 / std::sqrt(50.0)).epsilon(1e-14));
}

TEST_CASE("cc rejects constant maps") {
  const Raster a = map_of(1, 4, {0.25, 0.25, 0.25, 0.25});
  const Raster b = map_of(1, 4, {0.4, 0.3, 0.2, 0.1});
  CHECK_THROWS_AS(cc(a, b), DataError);
}

TEST_CASE("sim identities and the direct min-sum example") {
  Rng rng(4);
  const Raster p = random_salmap(rng, 4, 8);
  CHECK(sim(p, p) == doctest::Approx(1.0).epsilon(1e-12));

  const Raster a = map_of(1, 2, {0.6, 0.4});
  const Raster b = map_of(1, 2, {0.3, 0.7});
  CHECK(sim(a, b) == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(sim(b, a) == doctest::Approx(0.7).epsilon(1e-14));

  const Raster d1 = map_of(1, 4, {0.5, 0.5, 0.0, 0.0});
  const Raster d2 = map_of(1, 4, {0.0, 0.0, 0.5, 0.5});
  CHECK(sim(d1, d2) == doctest::Approx(0.0).epsilon(1e-14));

  const Raster q = random_salmap(rng, 4, 8);
  const double v = sim(p, q);
  CHECK(v >= 0.0);
  CHECK(v <= 1.0);
}

TEST_CASE("nss: constant maps give 0, fixation at the max is positive") {
  Raster constant(2, 4, 1);
  std::fill(constant.data.begin(), constant.data.end(), 0.125);
  Raster fix(2, 4, 1);
  fix.data[3] = 1.0;
  CHECK(nss(constant, fix) == 0.0);

  const Raster two = map_of(1, 2, {0.8, 0.2});
  Raster fix2 = map_of(1, 2, {1.0, 0.0});
  CHECK(nss(two, fix2) > 0.0);
}

TEST_CASE("nss six-pixel hand-computed z-scores") {
  const Raster p = map_of(1, 6, {1.0, 2.0, 3.0, 4.0, 5.0, 9.0});
  Raster fix = map_of(1, 6, {0.0, 1.0, 0.0, 0.0, 0.0, 1.0});
  const double mu = 4.0;
  const double var = (9.0 + 4.0 + 1.0 + 0.0 + 1.0 + 25.0) / 6.0;
  const double sigma = std::sqrt(var);
  const double expect = ((2.0 - mu) / sigma + (9.0 - mu) / sigma) / 2.0;
  CHECK(nss(p, fix) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("nss is invariant to positive affine transforms and rejects empty fixations") {
  Rng rng(5);
  const Raster p = random_salmap(rng, 4, 8);
  Raster fix(4, 8, 1);
  fix.data[5] = fix.data[17] = fix.data[30] = 1.0;
  Raster scaled = p;
  for (double& v : scaled.data) v = 11.0 * v + 3.0;
  CHECK(nss(scaled, fix) == doctest::Approx(nss(p, fix)).epsilon(1e-10));

  Raster empty(4, 8, 1);
  CHECK_THROWS_AS(nss(p, empty), DataError);
}

TEST_CASE("smse identities and the three-fixation hand computation") {
  Rng rng(6);
  const Raster p = random_salmap(rng, 4, 8);
  Raster fix(4, 8, 1);
  fix.data[2] = fix.data[9] = 1.0;
  CHECK(smse(p, p, fix) == doctest::Approx(0.0).epsilon(1e-14));

  // Single fixation at the extreme mismatch: normalized p = 1, q = 0 there.
  const Raster pp = map_of(1, 3, {0.0, 0.2, 1.0});
  const Raster qq = map_of(1, 3, {1.0, 0.2, 0.0});
  const Raster f1 = map_of(1, 3, {0.0, 0.0, 1.0});
  CHECK(smse(pp, qq, f1) == doctest::Approx(1.0).epsilon(1e-14));

  // Three fixations, direct mean of squares.
  const Raster p3 = map_of(1, 4, {0.0, 1.0, 2.0, 4.0});
  const Raster q3 = map_of(1, 4, {0.0, 4.0, 2.0, 1.0});
  const Raster f3 = map_of(1, 4, {1.0, 1.0, 1.0, 0.0});
  const double d1 = 0.0 - 0.0, d2 = 0.25 - 1.0, d3 = 0.5 - 0.5;
  const double expect = (d1 * d1 + d2 * d2 + d3 * d3) / 3.0;
  CHECK(smse(p3, q3, f3) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("supervised loss equals its three parts with alpha = 0.05") {
  Rng rng(7);
  const Raster p = random_salmap(rng, 4, 8);
  const Raster q = random_salmap(rng, 4, 8);
  Raster fix(4, 8, 1);
  fix.data[3] = fix.data[20] = 1.0;

  const Tensor tp = tensor_of(p), tq = tensor_of(q), tf = tensor_of(fix);
  const double loss = supervised_loss(tp, tq, tf).item();
  const double expect = kld(q, p) + (1.0 - cc(p, q)) + 0.05 * smse(p, q, fix);
  CHECK(loss == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("supervised loss at p = q_s is near zero") {
  Rng rng(8);
  const Raster q = random_salmap(rng, 4, 8);
  Raster fix(4, 8, 1);
  fix.data[7] = 1.0;
  const double loss = supervised_loss(tensor_of(q), tensor_of(q), tensor_of(fix)).item();
  CHECK(std::abs(loss) <= 1e-7 * static_cast<double>(q.data.size()) + 1e-9);
}

TEST_CASE("supervised loss at the ground truth beats random perturbations") {
  Rng rng(9);
  const Raster q = random_salmap(rng, 4, 8);
  Raster fix(4, 8, 1);
  fix.data[11] = fix.data[25] = 1.0;
  const Tensor tq = tensor_of(q), tf = tensor_of(fix);
  const double base = supervised_loss(tq, tq, tf).item();
  for (int t = 0; t < 200; ++t) {
    Raster p = q;
    for (double& v : p.data) v = std::max(1e-9, v + uniform(rng, -0.3, 0.3) * v);
    normalize_sum1(p);
    CHECK(supervised_loss(tensor_of(p), tq, tf).item() > base);
  }
}

TEST_CASE("plain metrics agree with tensor losses on random maps") {
  Rng rng(10);
  for (int t = 0; t < 10; ++t) {
    const Raster a = random_salmap(rng, 3, 6);
    const Raster b = random_salmap(rng, 3, 6);
    CHECK(kld_loss(tensor_of(a), tensor_of(b)).item() == doctest::Approx(kld(a, b)).epsilon(1e-12));
    CHECK(cc_loss(tensor_of(a), tensor_of(b)).item() == doctest::Approx(cc(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("vac loss: identical maps give ~0; cosine term vanishes") {
  Rng rng(11);
  const Raster y = random_salmap(rng, 4, 8);
  const double v = vac_loss(tensor_of(y), tensor_of(y)).item();
  CHECK(v <= 1e-6);
  CHECK(v >= -1e-7 * static_cast<double>(y.data.size()));
}

TEST_CASE("vac loss with an overlap-style weight mask") {
  Rng rng(12);
  const Raster a = random_salmap(rng, 4, 8);
  const Raster b = random_salmap(rng, 4, 8);
  Raster w(4, 8, 1);
  for (double& v : w.data) v = static_cast<double>(uniform_int(rng, 1, 4));

  SUBCASE("negative weights are rejected") {
    Raster bad = w;
    bad.data[0] = -1.0;
    CHECK_THROWS_AS(vac_loss(tensor_of(a), tensor_of(b), tensor_of(bad)), DataError);
  }

  SUBCASE("doubling the weight of a disagreeing pixel strictly increases the loss") {
    // Construct a pixel where y_main is large and y_aug is almost zero: the
    // weighted KLD contribution is positive there and the cross term is ~0.
    Raster ym = a, ya = b;
    ym.data[5] = 0.5;
    ya.data[5] = 1e-9;
    normalize_sum1(ym);
    normalize_sum1(ya);
    const double before = vac_loss(tensor_of(ym), tensor_of(ya), tensor_of(w)).item();
    Raster w2 = w;
    w2.data[5] *= 2.0;
    const double after = vac_loss(tensor_of(ym), tensor_of(ya), tensor_of(w2)).item();
    CHECK(after > before);
  }
}

TEST_CASE("supervised loss passes finite-difference gradient checks on 4x8 maps") {
  Rng rng(13);
  const Raster q = random_salmap(rng, 4, 8);
  Raster fix(4, 8, 1);
  fix.data[6] = fix.data[19] = fix.data[27] = 1.0;
  const Tensor tq = tensor_of(q), tf = tensor_of(fix);

  Raster p0 = random_salmap(rng, 4, 8);
  Tensor p = Tensor::from_data({32}, p0.data, true);
  const double err = ag::grad_check(
      [&](const Tensor& v) { return supervised_loss(v, tq, tf); }, p, 1e-6);
  CHECK(err < 1e-4);
}

TEST_CASE("vac loss passes finite-difference gradient checks in both arguments") {
  Rng rng(14);
  const Raster a = random_salmap(rng, 4, 8);
  const Raster b = random_salmap(rng, 4, 8);
  Raster w(4, 8, 1);
  for (double& v : w.data) v = static_cast<double>(uniform_int(rng, 1, 4));
  const Tensor tw = tensor_of(w);

  Tensor ta = Tensor::from_data({32}, a.data, true);
  const Tensor tb = tensor_of(b);
  const double err_a = ag::grad_check(
      [&](const Tensor& v) { return vac_loss(v, tb, tw); }, ta, 1e-6);
  CHECK(err_a < 1e-4);

  Tensor tb2 = Tensor::from_data({32}, b.data, true);
  const Tensor ta2 = tensor_of(a);
  const double err_b = ag::grad_check(
      [&](const Tensor& v) { return vac_loss(ta2, v, tw); }, tb2, 1e-6);
  CHECK(err_b < 1e-4);
}

TEST_CASE("kld and smse tensor losses pass gradient checks") {
  Rng rng(15);
  const Raster q = random_salmap(rng, 4, 8);
  const Tensor tq = tensor_of(q);
  Raster p0 = random_salmap(rng, 4, 8);
  Tensor p = Tensor::from_data({32}, p0.data, true);
  CHECK(ag::grad_check([&](const Tensor& v) { return kld_loss(tq, v); }, p, 1e-6) < 1e-4);
  CHECK(ag::grad_check([&](const Tensor& v) { return kld_loss(v, tq); }, p, 1e-6) < 1e-4);

  Raster fix(4, 8, 1);
  fix.data[4] = fix.data[22] = 1.0;
  const Tensor tf = tensor_of(fix);
  CHECK(ag::grad_check([&](const Tensor& v) { return smse_loss(v, tq, tf); }, p, 1e-6) < 1e-4);
}
