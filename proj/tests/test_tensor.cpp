#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "omnisal/common/rng.hpp"
#include "omnisal/tensor/checkpoint.hpp"
#include "omnisal/tensor/gradcheck.hpp"
#include "omnisal/tensor/optim.hpp"
#include "omnisal/tensor/tensor.hpp"

using namespace omnisal;
using namespace omnisal::ag;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0,
                     bool requires_grad = true) {
  std::vector<double> data(shape_size(shape));
  for (auto& v : data) v = uniform(rng, lo, hi);
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

// Scalarizes an arbitrary-output op with a weighting that is fixed for the
// lifetime of one finite-difference trial, so every output coordinate is
// exercised and repeated evaluations see the same function.
struct Scalarizer {
  explicit Scalarizer(std::uint64_t seed) : seed_(seed) {}
  Tensor operator()(const Tensor& y) const {
    Rng rng(seed_);
    std::vector<double> w(y.size());
    for (auto& v : w) v = uniform(rng, 0.5, 1.5);
    return sum(mul(y, Tensor::from_data(y.shape(), std::move(w))));
  }
  // Adds a fixed linear term in the checked input, which keeps every input
  // gradient away from zero where the relative-error denominator floors out.
  Tensor biased(const Tensor& y, const Tensor& input) const {
    Rng rng(seed_ + 7777);
    std::vector<double> c(input.size());
    for (auto& v : c) v = uniform(rng, 2.0, 3.0);
    return add((*this)(y), sum(mul(input, Tensor::from_data(input.shape(), std::move(c)))));
  }
  std::uint64_t seed_;
};

}  // namespace

TEST_CASE("softmax of a constant row is uniform and rows sum to one") {
  const Tensor x = Tensor::from_data({3}, {0.0, 0.0, 0.0});
  const Tensor y = softmax(x, 0);
  for (double v : y.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  Rng rng(11);
  const Tensor z = softmax(random_tensor(rng, {5, 7}, -3.0, 3.0, false), 1);
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) s += z.values()[r * 7 + c];
    CHECK(std::abs(s - 1.0) < 1e-12);
    for (std::size_t c = 0; c < 7; ++c) CHECK(z.values()[r * 7 + c] >= 0.0);
  }
}

TEST_CASE("matmul by the identity returns the operand") {
  Rng rng(5);
  const Tensor a = random_tensor(rng, {4, 4}, -2.0, 2.0, false);
  Tensor eye = Tensor::zeros({4, 4});
  for (int i = 0; i < 4; ++i) eye.raw_values()[i * 4 + i] = 1.0;
  const Tensor y = matmul(eye, a);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(y.values()[i] == a.values()[i]);
}

TEST_CASE("conv2d all-ones 3x3 on a 5x5 ones input with pad 1") {
  const Tensor x = Tensor::filled({1, 5, 5}, 1.0);
  const Tensor w = Tensor::filled({1, 1, 3, 3}, 1.0);
  const Tensor y = conv2d(x, w, Tensor(), 1, 1);
  REQUIRE(y.shape() == Shape{1, 5, 5});
  // Direct summation oracle.
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      double expect = 0.0;
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          const int ii = i + di, jj = j + dj;
          if (ii >= 0 && ii < 5 && jj >= 0 && jj < 5) expect += 1.0;
        }
      }
      CHECK(y.values()[i * 5 + j] == doctest::Approx(expect));
      if (i > 0 && i < 4 && j > 0 && j < 4) CHECK(y.values()[i * 5 + j] == 9.0);
    }
  }
}

TEST_CASE("conv2d matches a naive oracle on random strided/padded input") {
  Rng rng(17);
  const std::size_t ci = 3, h = 7, w = 9, co = 2, kh = 3, kw = 3, stride = 2, pad = 1;
  const Tensor x = random_tensor(rng, {ci, h, w}, -1.0, 1.0, false);
  const Tensor k = random_tensor(rng, {co, ci, kh, kw}, -1.0, 1.0, false);
  const Tensor b = random_tensor(rng, {co}, -0.5, 0.5, false);
  const Tensor y = conv2d(x, k, b, stride, pad);
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
  const std::size_t ow = (w + 2 * pad - kw) / stride + 1;
  REQUIRE(y.shape() == Shape{co, oh, ow});
  for (std::size_t oc = 0; oc < co; ++oc) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = b.values()[oc];
        for (std::size_t ic = 0; ic < ci; ++ic) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
              const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
              if (iy < 0 || iy >= static_cast<long>(h) || ix < 0 || ix >= static_cast<long>(w)) continue;
              acc += x.values()[(ic * h + iy) * w + ix] *
                     k.values()[((oc * ci + ic) * kh + ky) * kw + kx];
            }
          }
        }
        CHECK(y.values()[(oc * oh + oy) * ow + ox] == doctest::Approx(acc).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("backward of sum is all-ones; backward of sum(x*x) is 2x") {
  Rng rng(2);
  Tensor x = random_tensor(rng, {3, 4});
  sum(x).backward();
  for (double g : x.grad()) CHECK(g == 1.0);

  Tensor y = random_tensor(rng, {6});
  sum(mul(y, y)).backward();
  for (std::size_t i = 0; i < y.size(); ++i) {
    CHECK(y.grad()[i] == doctest::Approx(2.0 * y.values()[i]).epsilon(1e-14));
  }
}

TEST_CASE("every primitive passes randomized finite-difference checks") {
  Rng rng(23);
  const int trials = 100;
  auto check_op = [&](const std::string& name, auto make_input, auto apply) {
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
      Tensor x = make_input(rng);
      const Scalarizer sc(1000 + static_cast<std::uint64_t>(t));
      const double err = grad_check(
          [&](const Tensor& v) { return sc.biased(apply(v, sc), v); }, x, 1e-6);
      worst = std::max(worst, err);
    }
    INFO("op: " << name);
    CHECK(worst < 1e-4);
  };

  auto vec6 = [](Rng& r) { return random_tensor(r, {6}); };
  auto mat34 = [](Rng& r) { return random_tensor(r, {3, 4}); };

  check_op("add", mat34, [](const Tensor& v, const Scalarizer& sc) {
    Rng local(99);
    return sc(add(v, random_tensor(local, v.shape(), -1, 1, false)));
  });
  check_op("sub+scale", mat34, [](const Tensor& v, const Scalarizer& sc) {
    Rng local(98);
    return sc(sub(scale(v, 1.7), random_tensor(local, v.shape(), -1, 1, false)));
  });
  check_op("mul", mat34, [](const Tensor& v, const Scalarizer& sc) {
    Rng local(97);
    return sc(mul(v, random_tensor(local, v.shape(), 0.5, 1.5, false)));
  });
  check_op("div", mat34, [](const Tensor& v, const Scalarizer& sc) {
    Rng local(96);
    return sc(div(v, random_tensor(local, v.shape(), 0.7, 1.8, false)));
  });
  check_op("div-by-scalar-tensor", mat34, [](const Tensor& v, const Scalarizer& sc) {
    return sc(div(v, add_scalar(sum(mul(v, v)), 0.5)));
  });
  check_op("matmul", mat34, [](const Tensor& v, const Scalarizer& sc) {
    Rng local(95);
    return sc(matmul(v, random_tensor(local, {4, 5}, -1, 1, false)));
  });
  check_op("concat+slice", mat34, [](const Tensor& v, const Scalarizer& sc) {
    const Tensor c = concat<double>({v, scale(v, 0.5)}, 1);
    return sc(slice(c, 1, 2, 5));
  });
  check_op("reshape+transpose", mat34, [](const Tensor& v, const Scalarizer& sc) {
    return sc(transpose(reshape(v, {2, 6}), 0, 1));
  });
  check_op("mean+sum_axis", mat34, [](const Tensor& v, const Scalarizer& sc) {
    return add(mean(v), sc(sum_axis(v, 0)));
  });
  check_op("relu (inputs nudged off the kink)", [](Rng& r) {
    Tensor x = random_tensor(r, {8});
    for (auto& v : x.raw_values()) {
      if (std::abs(v) < 0.05) v = v < 0 ? v - 0.05 : v + 0.05;
    }
    return x;
  }, [](const Tensor& v, const Scalarizer& sc) { return sc(relu(v)); });
  check_op("softplus", vec6, [](const Tensor& v, const Scalarizer& sc) {
    return sc(softplus(v));
  });
  check_op("log", [](Rng& r) { return random_tensor(r, {6}, 0.2, 2.0); },
           [](const Tensor& v, const Scalarizer& sc) { return sc(log_op(v)); });
  check_op("exp", vec6, [](const Tensor& v, const Scalarizer& sc) { return sc(exp_op(v)); });
  check_op("sqrt", [](Rng& r) { return random_tensor(r, {6}, 0.3, 2.5); },
           [](const Tensor& v, const Scalarizer& sc) { return sc(sqrt_op(v)); });
  check_op("minimum", vec6, [](const Tensor& v, const Scalarizer& sc) {
    Rng local(94);
    Tensor other = random_tensor(local, v.shape(), -1, 1, false);
    return sc(minimum(v, other));
  });
  check_op("softmax", [](Rng& r) { return random_tensor(r, {4, 5}, -2.0, 2.0); },
           [](const Tensor& v, const Scalarizer& sc) { return sc(softmax(v, 1)); });
  check_op("layer_norm", [](Rng& r) { return random_tensor(r, {3, 6}); },
           [](const Tensor& v, const Scalarizer& sc) {
             Rng local(93);
             Tensor gamma = random_tensor(local, {6}, 0.5, 1.5, false);
             Tensor beta = random_tensor(local, {6}, -0.3, 0.3, false);
             return sc(layer_norm(v, std::size_t{1}, gamma, beta, 1e-5));
           });
  check_op("conv2d", [](Rng& r) { return random_tensor(r, {2, 5, 6}); },
           [](const Tensor& v, const Scalarizer& sc) {
             Rng local(92);
             Tensor k = random_tensor(local, {3, 2, 3, 3}, -0.8, 0.8, false);
             Tensor b = random_tensor(local, {3}, -0.2, 0.2, false);
             return sc(conv2d(v, k, b, 2, 1));
           });
  check_op("upsample_nearest2", [](Rng& r) { return random_tensor(r, {2, 3, 4}); },
           [](const Tensor& v, const Scalarizer& sc) { return sc(upsample_nearest2(v)); });
  check_op("reduce_max/min (unique extremes)", [](Rng& r) {
    Tensor x = random_tensor(r, {7});
    x.raw_values()[2] = 5.0;
    x.raw_values()[5] = -5.0;
    return x;
  }, [](const Tensor& v, const Scalarizer&) { return add(reduce_max(v), scale(reduce_min(v), 0.3)); });
}

TEST_CASE("conv2d weight and bias gradients pass finite differences") {
  Rng rng(31);
  const Tensor x = random_tensor(rng, {2, 5, 5}, -1, 1, false);
  Tensor w = random_tensor(rng, {2, 2, 3, 3});
  const double err_w = grad_check(
      [&](const Tensor& v) { return sum(conv2d(x, v, Tensor(), 1, 1)); }, w, 1e-6);
  CHECK(err_w < 1e-4);
  Tensor b = random_tensor(rng, {2});
  const Tensor wc = w.detach();
  const double err_b = grad_check(
      [&](const Tensor& v) { return sum(mul(conv2d(x, wc, v, 1, 1), conv2d(x, wc, v, 1, 1))); }, b, 1e-6);
  CHECK(err_b < 1e-4);
}

TEST_CASE("apply_linear_map gradient equals the transpose operator") {
  LinearMapBuilder builder(4, 3);
  builder.add(0, 0.5); builder.add(1, 0.5); builder.finish_row();
  builder.add(2, 1.0); builder.finish_row();
  builder.add(1, 0.25); builder.add(3, 0.75); builder.finish_row();
  auto map = std::make_shared<const LinearMap>(builder.build());
  Rng rng(41);
  Tensor x = random_tensor(rng, {2, 4});
  const Scalarizer sc(2024);
  const double err = grad_check(
      [&](const Tensor& v) { return sc(apply_linear_map(map, v)); }, x, 1e-6);
  CHECK(err < 1e-4);
}

TEST_CASE("three-layer MLP gradients match central differences") {
  Rng rng(53);
  Tensor x = random_tensor(rng, {2, 5});
  Tensor w1 = random_tensor(rng, {5, 7});
  Tensor b1 = random_tensor(rng, {7});
  Tensor w2 = random_tensor(rng, {7, 6});
  Tensor b2 = random_tensor(rng, {6});
  Tensor w3 = random_tensor(rng, {6, 1});
  auto f = [&]() {
    Tensor h1 = relu(linear(x, w1, b1));
    Tensor h2 = relu(linear(h1, w2, b2));
    return mean(linear(h2, w3));
  };
  const double err = grad_check_params(f, {x, w1, b1, w2, b2, w3}, 1e-6);
  CHECK(err < 1e-4);
}

TEST_CASE("softmax cross-entropy composite passes the gradient check") {
  Rng rng(59);
  Tensor x = random_tensor(rng, {3, 4}, -2.0, 2.0);
  Tensor target = Tensor::from_data({3, 4}, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1});
  const double err = grad_check(
      [&](const Tensor& v) {
        const Tensor p = softmax(v, 1);
        return neg(sum(mul(target, log_op(add_scalar(p, 1e-9)))));
      },
      x, 1e-6);
  CHECK(err < 1e-4);
}

TEST_CASE("grad_check of sum itself is near machine precision") {
  // Dyadic values and a dyadic step keep the central difference exact.
  Tensor x = Tensor::from_data({5}, {0.5, -0.25, 1.0, 0.125, -2.0}, true);
  const double h = std::ldexp(1.0, -20);
  CHECK(grad_check([](const Tensor& v) { return sum(v); }, x, h) < 1e-12);
}

TEST_CASE("layer_norm output is standardized before the affine map") {
  Rng rng(67);
  const Tensor x = random_tensor(rng, {4, 16}, -3.0, 3.0, false);
  const Tensor gamma = Tensor::filled({16}, 1.0);
  const Tensor beta = Tensor::zeros({16});
  const Tensor y = layer_norm(x, std::size_t{1}, gamma, beta, 1e-12);
  for (std::size_t r = 0; r < 4; ++r) {
    double mu = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 16; ++c) mu += y.values()[r * 16 + c];
    mu /= 16.0;
    for (std::size_t c = 0; c < 16; ++c) {
      const double d = y.values()[r * 16 + c] - mu;
      var += d * d;
    }
    var /= 16.0;
    CHECK(std::abs(mu) < 1e-10);
    CHECK(std::abs(var - 1.0) < 1e-8);
  }
}

TEST_CASE("forward evaluation is bitwise deterministic") {
  Rng rng1(71), rng2(71);
  const Tensor a1 = random_tensor(rng1, {8, 8}, -1, 1, false);
  const Tensor a2 = random_tensor(rng2, {8, 8}, -1, 1, false);
  const Tensor y1 = softmax(matmul(a1, a1), 1);
  const Tensor y2 = softmax(matmul(a2, a2), 1);
  for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y1.values()[i] == y2.values()[i]);
}

TEST_CASE("AdamW: zero gradient and zero weight decay leave parameters unchanged") {
  Tensor p = Tensor::from_data({3}, {1.0, -2.0, 3.0}, true);
  p.zero_grad();
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  AdamW opt({p}, cfg);
  opt.step();
  CHECK(p.values() == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("AdamW default hyperparameters") {
  const AdamWConfig cfg;
  CHECK(cfg.beta1 == 0.9);
  CHECK(cfg.beta2 == 0.999);
  CHECK(cfg.weight_decay == 1e-2);
  CHECK(cfg.lr == 1e-5);
}

TEST_CASE("AdamW matches a scalar reference implementation and converges") {
  // Minimize (x - 3)^2 from x = 0.
  Tensor x = Tensor::from_data({1}, {0.0}, true);
  AdamWConfig cfg;
  cfg.lr = 1e-2;
  cfg.weight_decay = 0.0;
  AdamW opt({x}, cfg);

  double rx = 0.0, rm = 0.0, rv = 0.0;  // reference state
  for (int t = 1; t <= 1000; ++t) {
    opt.zero_grad();
    const Tensor loss = mul(add_scalar(x, -3.0), add_scalar(x, -3.0));
    loss.backward();
    const double g_model = x.grad()[0];

    const double g = 2.0 * (rx - 3.0);
    CHECK(g_model == doctest::Approx(g).epsilon(1e-12));
    rm = cfg.beta1 * rm + (1 - cfg.beta1) * g;
    rv = cfg.beta2 * rv + (1 - cfg.beta2) * g * g;
    const double mhat = rm / (1 - std::pow(cfg.beta1, t));
    const double vhat = rv / (1 - std::pow(cfg.beta2, t));
    rx -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);

    opt.step();
    CHECK(x.values()[0] == doctest::Approx(rx).epsilon(1e-12));
  }
  CHECK(std::abs(x.values()[0] - 3.0) < 0.1);
}

TEST_CASE("AdamW weight decay is decoupled (applied even with zero gradient)") {
  Tensor p = Tensor::from_data({1}, {1.0}, true);
  p.zero_grad();
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  AdamW opt({p}, cfg);
  opt.step();
  CHECK(p.values()[0] == doctest::Approx(1.0 - 0.1 * 0.5 * 1.0).epsilon(1e-12));
}

TEST_CASE("cosine schedule endpoints and midpoint") {
  CHECK(cosine_lr(0, 1000, 1e-5, 2e-6) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(cosine_lr(1000, 1000, 1e-5, 2e-6) == doctest::Approx(2e-6).epsilon(1e-12));
  CHECK(cosine_lr(500, 1000, 1e-5, 2e-6) == doctest::Approx((1e-5 + 2e-6) / 2).epsilon(1e-12));
  CHECK_THROWS_AS(cosine_lr(1001, 1000, 1e-5, 2e-6), DataError);
}

TEST_CASE("checkpoint save/load round-trips exactly in f64") {
  ParamStore store;
  Rng rng(83);
  init::normal(store.create("layer0.w", {4, 3}), rng, 0.0, 1.0);
  init::uniform(store.create("layer0.b", {3}), rng, -1.0, 1.0);
  init::normal(store.create("layer1.w", {3, 2}), rng, 0.0, 0.5);
  store.save("test_ckpt");

  ParamStore other;
  other.create("layer0.w", {4, 3});
  other.create("layer0.b", {3});
  other.create("layer1.w", {3, 2});
  other.load("test_ckpt");
  for (const auto& name : store.names()) {
    CHECK(other.at(name).values() == store.at(name).values());
  }

  ParamStore bad;
  bad.create("layer0.w", {4, 4});
  bad.create("layer0.b", {3});
  bad.create("layer1.w", {3, 2});
  CHECK_THROWS_AS(bad.load("test_ckpt"), DataError);

  std::remove("test_ckpt.json");
  std::remove("test_ckpt.bin");
}

TEST_CASE("f32 checkpoints load back within float precision") {
  ParamStore store;
  Rng rng(89);
  init::normal(store.create("w", {16}), rng, 0.0, 2.0);
  store.save("test_ckpt32", /*as_f32=*/true);
  ParamStore other;
  other.create("w", {16});
  other.load("test_ckpt32");
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(other.at("w").values()[i] == doctest::Approx(store.at("w").values()[i]).epsilon(1e-6));
  }
  std::remove("test_ckpt32.json");
  std::remove("test_ckpt32.bin");
}

TEST_CASE("float tensors run the same op set") {
  Tensor32 x = Tensor32::from_data({2, 2}, {1.f, 2.f, 3.f, 4.f}, true);
  Tensor32 y = sum(mul(x, x));
  y.backward();
  CHECK(y.item() == doctest::Approx(30.f));
  CHECK(x.grad()[3] == doctest::Approx(8.f));
}

TEST_CASE("shape errors are reported") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({3, 3});
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(reshape(a, {7}), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({0, 2}), ShapeError);
  CHECK_THROWS_AS(a.backward(), ShapeError);  // non-scalar loss
}
