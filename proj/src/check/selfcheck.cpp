#include "omnisal/check/selfcheck.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include "omnisal/audio/foa.hpp"
#include "omnisal/common/rng.hpp"
#include "omnisal/fusion/av_model.hpp"
#include "omnisal/gaze/gaze.hpp"
#include "omnisal/geometry/sampling_map.hpp"
#include "omnisal/net/model.hpp"
#include "omnisal/sal/losses.hpp"
#include "omnisal/sal/metrics.hpp"
#include "omnisal/tensor/gradcheck.hpp"
#include "omnisal/toy/toytrain.hpp"
#include "omnisal/vqa/quality.hpp"

namespace omnisal::check {

using ag::Tensor;

namespace {

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

struct Claims {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!ok) detail << "[failed: " << what << "] ";
  }
  void note(const std::string& what) { detail << what << " "; }
};

// Wall-clock timing stays out of the detail string: selftest output must be
// bitwise identical across runs.
CheckResult finish(const char* name, Claims& c, const Timer& timer, double budget_s) {
  c.require(timer.seconds() < budget_s, "runtime budget");
  return {name, c.pass, c.detail.str(), timer.seconds()};
}

double pattern(const geom::SphericalCoord& c) {
  return 0.5 + 0.25 * std::cos(c.lat) * std::cos(c.lon) + 0.2 * std::sin(c.lat);
}

geom::ErpGrid pattern_grid(int h) {
  geom::ErpGrid g(h, 1);
  for (int i = 0; i < g.height; ++i) {
    for (int j = 0; j < g.width; ++j) g.at(0, i, j) = pattern(g.pixel_center(i, j));
  }
  return g;
}

geom::ErpGrid random_salmap(Rng& rng, int h) {
  geom::ErpGrid m(h, 1);
  for (double& v : m.data) v = uniform(rng, 0.05, 1.0);
  sal::normalize_sum1(m);
  return m;
}

}  // namespace

CheckResult check_geometry_roundtrip(int jobs) {
  Timer timer;
  Claims c;
  const geom::ViewportLayout layout = geom::default_layout();
  const geom::SamplingMap map = geom::build_sampling_map(layout, 128, 256, jobs);
  const geom::ErpGrid erp = pattern_grid(128);
  const auto patches = geom::project_to_tangents(erp, map, jobs);
  const auto [back, weight] = geom::back_project(patches, map, jobs);
  double err_sum = 0.0, lo = 1e300, hi = -1e300;
  for (double v : erp.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool covered = true;
  for (std::size_t i = 0; i < erp.data.size(); ++i) {
    covered = covered && weight.data[i] > 0.0;
    err_sum += std::abs(back.data[i] - erp.data[i]);
  }
  const double mae = err_sum / static_cast<double>(erp.data.size());
  c.require(covered, "full coverage at H=128");
  c.require(mae < 0.01 * (hi - lo), "round-trip MAE < 1% of range");
  {
    std::ostringstream s;
    s << "mae/range=" << mae / (hi - lo);
    c.note(s.str());
  }

  Rng rng(7);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const geom::SphericalCoord center{std::asin(uniform(rng, -1.0, 1.0)), uniform(rng, -geom::kPi, geom::kPi)};
    const double ang = uniform(rng, 0.0, geom::deg_to_rad(40.0));
    const double dir = uniform(rng, 0.0, 2.0 * geom::kPi);
    const geom::PlanePoint offset{std::tan(ang) * std::cos(dir), std::tan(ang) * std::sin(dir)};
    const geom::SphericalCoord q = geom::gnomonic_inverse(center, offset);
    const geom::PlanePoint p = geom::gnomonic_forward(center, q);
    worst = std::max(worst, geom::angular_distance(q, geom::gnomonic_inverse(center, p)));
  }
  c.require(worst < 1e-10, "point round-trip < 1e-10 rad over 1e4 pairs");
  {
    std::ostringstream s;
    s << "worst-pt-err=" << worst;
    c.note(s.str());
  }
  return finish("geometry round-trip", c, timer, 10.0);
}

CheckResult check_overlap_mask(int jobs) {
  Timer timer;
  Claims c;
  const geom::ViewportLayout layout = geom::default_layout();
  const geom::ErpGrid mask = geom::overlap_mask(layout, 128, 256, jobs);
  const geom::ErpGrid probe(128, 1);
  const double r = layout.half_extent();
  double max_v = 0.0;
  bool exact = true;
  for (int i = 0; i < 128; ++i) {
    for (int j = 0; j < 256; ++j) {
      const geom::SphericalCoord q = probe.pixel_center(i, j);
      int count = 0;
      for (const auto& ctr : layout.centers) {
        const double dl = q.lon - ctr.lon;
        const double cos_c = std::sin(ctr.lat) * std::sin(q.lat) +
                             std::cos(ctr.lat) * std::cos(q.lat) * std::cos(dl);
        if (cos_c <= 0.0) continue;
        const double x = std::cos(q.lat) * std::sin(dl) / cos_c;
        const double y = (std::cos(ctr.lat) * std::sin(q.lat) -
                          std::sin(ctr.lat) * std::cos(q.lat) * std::cos(dl)) / cos_c;
        if (std::abs(x) <= r && std::abs(y) <= r) ++count;
      }
      exact = exact && mask.at(0, i, j) == static_cast<double>(count);
      max_v = std::max(max_v, mask.at(0, i, j));
    }
  }
  c.require(exact, "mask equals brute-force counts exactly");
  c.require(max_v == 4.0, "max coverage is 4");
  {
    std::ostringstream s;
    s << "max=" << max_v;
    c.note(s.str());
  }
  return finish("overlap mask", c, timer, 5.0);
}

CheckResult check_attention() {
  Timer timer;
  Claims c;
  const net::AttentionCost cost = net::attention_cost(8, 18);
  c.require(cost.factored_per_group == 388 && cost.joint_per_group == 20736,
            "attention_cost(8,18) == (388, 20736)");

  net::NetConfig cfg = net::micro_config();
  cfg.frames = 3;
  geom::ViewportLayout layout = geom::rings_layout({{-30.0, 2}, {30.0, 2}}, 110.0, cfg.patch);
  net::SaliencyModel model(cfg, layout);
  Rng rng(11);
  model.init_params(rng);
  const std::size_t T = 4, F = 3, d = 8;
  std::vector<double> tok(T * F * d);
  for (auto& v : tok) v = uniform(rng, -1.0, 1.0);
  const Tensor tokens = Tensor::from_data({T, F, d}, tok);

  // Dense oracle per group, and probability row sums.
  auto dense_group = [&](const char* which, const std::vector<double>& x, std::size_t n) {
    const std::string pre = "vis.blk0." + std::string(which) + ".";
    const auto& P = model.params();
    net::AttentionParams ap{P.at(pre + "wq"), P.at(pre + "bq"), P.at(pre + "wk"),
                            P.at(pre + "bk"), P.at(pre + "wv"), P.at(pre + "bv"),
                            P.at(pre + "wo"), P.at(pre + "bo"), cfg.heads};
    // LN oracle.
    std::vector<double> normed(n * d);
    const auto& gamma = P.at(pre + "ln.gamma").values();
    const auto& beta = P.at(pre + "ln.beta").values();
    for (std::size_t i = 0; i < n; ++i) {
      double mu = 0.0, var = 0.0;
      for (std::size_t j = 0; j < d; ++j) mu += x[i * d + j];
      mu /= static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j) var += (x[i * d + j] - mu) * (x[i * d + j] - mu);
      var /= static_cast<double>(d);
      const double inv = 1.0 / std::sqrt(var + 1e-5);
      for (std::size_t j = 0; j < d; ++j) normed[i * d + j] = (x[i * d + j] - mu) * inv * gamma[j] + beta[j];
    }
    std::vector<Tensor> probs;
    const Tensor out = net::multi_head_attention(Tensor::from_data({n, d}, normed), ap, nullptr, &probs);
    for (const auto& m : probs) {
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += m.values()[i * n + j];
        c.require(std::abs(s - 1.0) < 1e-12, "softmax rows sum to 1 within 1e-12");
      }
    }
    // Independent plain-loop attention.
    const std::size_t dh = d / cfg.heads;
    auto proj = [&](const Tensor& w, const Tensor& b) {
      std::vector<double> o(n * d, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          double acc = b.values()[j];
          for (std::size_t k2 = 0; k2 < d; ++k2) acc += normed[i * d + k2] * w.values()[k2 * d + j];
          o[i * d + j] = acc;
        }
      return o;
    };
    const auto q = proj(ap.wq, ap.bq), k = proj(ap.wk, ap.bk), v = proj(ap.wv, ap.bv);
    std::vector<double> merged(n * d, 0.0);
    for (int h2 = 0; h2 < cfg.heads; ++h2) {
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row(n);
        double mx = -1e300;
        for (std::size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (std::size_t cdim = 0; cdim < dh; ++cdim)
            acc += q[i * d + h2 * dh + cdim] * k[j * d + h2 * dh + cdim];
          row[j] = acc / std::sqrt(static_cast<double>(dh));
          mx = std::max(mx, row[j]);
        }
        double z = 0.0;
        for (auto& rv : row) { rv = std::exp(rv - mx); z += rv; }
        for (std::size_t cdim = 0; cdim < dh; ++cdim) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += row[j] / z * v[j * d + h2 * dh + cdim];
          merged[i * d + h2 * dh + cdim] = acc;
        }
      }
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        double acc = ap.bo.values()[j];
        for (std::size_t k2 = 0; k2 < d; ++k2) acc += merged[i * d + k2] * ap.wo.values()[k2 * d + j];
        worst = std::max(worst, std::abs(out.values()[i * d + j] - acc));
      }
    }
    return worst;
  };

  double worst = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> x(F * d);
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t j = 0; j < d; ++j) x[f * d + j] = tok[(t * F + f) * d + j];
    worst = std::max(worst, dense_group("vta", x, F));
  }
  for (std::size_t f = 0; f < F; ++f) {
    std::vector<double> x(T * d);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < d; ++j) x[t * d + j] = tok[(t * F + f) * d + j];
    worst = std::max(worst, dense_group("vsa", x, T));
  }
  c.require(worst < 1e-10, "attention matches dense oracle within 1e-10");
  {
    std::ostringstream s;
    s << "worst-attn-err=" << worst;
    c.note(s.str());
  }

  model.reset_score_counter();
  model.vsta_block(tokens, 0);
  const net::AttentionCost micro_cost = net::attention_cost(F, T);
  c.require(model.score_entries() ==
                static_cast<std::size_t>(cfg.heads) * micro_cost.factored_total_entries,
            "instrumented score entries equal the factored figure");
  return finish("attention correctness", c, timer, 10.0);
}

CheckResult check_differentiability() {
  Timer timer;
  Claims c;
  Rng rng(17);
  auto rnd = [&](ag::Shape s, double lo = -1.0, double hi = 1.0, bool rg = true) {
    std::vector<double> data(ag::shape_size(s));
    for (auto& v : data) v = uniform(rng, lo, hi);
    return Tensor::from_data(std::move(s), std::move(data), rg);
  };
  auto scalarize = [&](const Tensor& y) {
    Rng local(99);
    std::vector<double> w(y.size());
    for (auto& v : w) v = uniform(local, 0.5, 1.5);
    return ag::sum(ag::mul(y, Tensor::from_data(y.shape(), std::move(w))));
  };

  double worst = 0.0;
  auto run = [&](const char* what, auto make, auto apply) {
    double op_worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      Tensor x = make();
      op_worst = std::max(op_worst, ag::grad_check(
          [&](const Tensor& v) { return apply(v); }, x, 1e-6));
    }
    worst = std::max(worst, op_worst);
    c.require(op_worst < 1e-4, std::string(what) + " < 1e-4");
  };

  const Tensor opb = rnd({3, 4}, 0.5, 1.5, false);
  run("add", [&] { return rnd({3, 4}); }, [&](const Tensor& v) { return scalarize(ag::add(v, opb)); });
  run("sub", [&] { return rnd({3, 4}); }, [&](const Tensor& v) { return scalarize(ag::sub(v, opb)); });
  run("mul", [&] { return rnd({3, 4}); }, [&](const Tensor& v) { return scalarize(ag::mul(v, opb)); });
  run("div", [&] { return rnd({3, 4}); }, [&](const Tensor& v) { return scalarize(ag::div(v, opb)); });
  run("scale", [&] { return rnd({3, 4}); }, [&](const Tensor& v) { return scalarize(ag::scale(v, 1.7)); });
  const Tensor mm = rnd({4, 5}, -1, 1, false);
  run("matmul", [&] { return rnd({3, 4}); }, [&](const Tensor& v) { return scalarize(ag::matmul(v, mm)); });
  run("concat+slice", [&] { return rnd({3, 4}); }, [&](const Tensor& v) {
    return scalarize(ag::slice(ag::concat<double>({v, ag::scale(v, 0.4)}, 1), 1, 2, 5));
  });
  run("reshape+transpose", [&] { return rnd({3, 4}); }, [&](const Tensor& v) {
    return scalarize(ag::transpose(ag::reshape(v, {2, 6}), 0, 1));
  });
  run("mean+sum", [&] { return rnd({3, 4}); }, [&](const Tensor& v) {
    return ag::add(ag::mean(v), ag::sum(ag::mul(v, v)));
  });
  run("relu", [&] {
    Tensor x = rnd({8});
    for (auto& v : x.raw_values()) v += v < 0 ? -0.05 : 0.05;
    return x;
  }, [&](const Tensor& v) { return scalarize(ag::relu(v)); });
  run("softplus", [&] { return rnd({8}); }, [&](const Tensor& v) { return scalarize(ag::softplus(v)); });
  run("softmax", [&] { return rnd({3, 5}, -2, 2); }, [&](const Tensor& v) { return scalarize(ag::softmax(v, 1)); });
  const Tensor gma = rnd({6}, 0.5, 1.5, false), bta = rnd({6}, -0.3, 0.3, false);
  run("layer_norm", [&] { return rnd({3, 6}); }, [&](const Tensor& v) {
    return scalarize(ag::layer_norm(v, std::size_t{1}, gma, bta, 1e-5));
  });
  const Tensor kern = rnd({3, 2, 3, 3}, -0.8, 0.8, false), kb = rnd({3}, -0.2, 0.2, false);
  run("conv2d", [&] { return rnd({2, 5, 6}); }, [&](const Tensor& v) {
    return scalarize(ag::conv2d(v, kern, kb, 2, 1));
  });
  run("upsample", [&] { return rnd({2, 3, 4}); }, [&](const Tensor& v) {
    return scalarize(ag::upsample_nearest2(v));
  });

  // Losses: Eq. 2 composite and the VAC pair.
  Rng mrng(23);
  for (int t = 0; t < 5; ++t) {
    geom::ErpGrid q = random_salmap(mrng, 4);
    geom::ErpGrid p0 = random_salmap(mrng, 4);
    geom::ErpGrid fix(4, 1);
    fix.data[3] = fix.data[17] = 1.0;
    const Tensor tq = Tensor::from_data({q.data.size()}, q.data);
    const Tensor tf = Tensor::from_data({fix.data.size()}, fix.data);
    Tensor p = Tensor::from_data({p0.data.size()}, p0.data, true);
    const double e1 = ag::grad_check(
        [&](const Tensor& v) { return sal::supervised_loss(v, tq, tf); }, p, 1e-6);
    c.require(e1 < 1e-4, "supervised loss gradient < 1e-4");
    geom::ErpGrid w(4, 1);
    for (double& v : w.data) v = static_cast<double>(uniform_int(mrng, 1, 4));
    const Tensor tw = Tensor::from_data({w.data.size()}, w.data);
    Tensor y = Tensor::from_data({p0.data.size()}, p0.data, true);
    const double e2 = ag::grad_check(
        [&](const Tensor& v) { return sal::vac_loss(v, tq, tw); }, y, 1e-6);
    c.require(e2 < 1e-4, "VAC loss gradient < 1e-4");
    worst = std::max(worst, std::max(e1, e2));
  }

  // Micro end-to-end.
  const net::NetConfig cfg = net::micro_config();
  geom::ViewportLayout layout = geom::rings_layout({{-30.0, 2}, {30.0, 2}}, 110.0, cfg.patch);
  net::SaliencyModel model(cfg, layout);
  Rng prng(15);
  model.init_params(prng);
  std::vector<std::vector<Tensor>> patches(cfg.frames);
  for (auto& per_frame : patches) {
    for (std::size_t t = 0; t < layout.count(); ++t) {
      std::vector<double> data(3 * 16 * 16);
      for (auto& v : data) v = uniform(prng, 0.0, 1.0);
      per_frame.push_back(Tensor::from_data({3, 16, 16}, std::move(data)));
    }
  }
  const std::size_t n = 16 * 32;
  std::vector<double> qv(n);
  for (auto& v : qv) v = uniform(prng, 0.1, 1.0);
  double qs = 0.0;
  for (double v : qv) qs += v;
  for (auto& v : qv) v /= qs;
  std::vector<double> fv(n, 0.0);
  fv[100] = fv[321] = 1.0;
  const Tensor tq = Tensor::from_data({n}, qv);
  const Tensor tf = Tensor::from_data({n}, fv);
  const double e2e = ag::grad_check_params(
      [&]() { return sal::supervised_loss(model.forward_from_patches(patches), tq, tf); },
      model.params().tensors(), 1e-6);
  c.require(e2e < 1e-3, "micro end-to-end gradient < 1e-3");
  {
    std::ostringstream s;
    s << "worst-op=" << worst << " e2e=" << e2e;
    c.note(s.str());
  }
  return finish("differentiability", c, timer, 120.0);
}

CheckResult check_metric_identities() {
  Timer timer;
  Claims c;
  Rng rng(29);
  const geom::ErpGrid p = random_salmap(rng, 8);
  c.require(sal::kld(p, p) <= 1e-6, "kld(P,P) <= 1e-6");
  c.require(std::abs(sal::cc(p, p) - 1.0) < 1e-12, "cc(P,P) == 1");
  c.require(std::abs(sal::sim(p, p) - 1.0) < 1e-12, "sim(P,P) == 1");

  geom::ErpGrid constant(8, 1);
  std::fill(constant.data.begin(), constant.data.end(), 1.0 / constant.data.size());
  geom::ErpGrid fix(8, 1);
  fix.data[5] = fix.data[60] = 1.0;
  c.require(sal::nss(constant, fix) == 0.0, "nss of a constant map is 0");

  const geom::ErpGrid q = random_salmap(rng, 4);
  geom::ErpGrid qfix(4, 1);
  qfix.data[7] = qfix.data[19] = 1.0;
  const Tensor tq = Tensor::from_data({q.data.size()}, q.data);
  const Tensor tf = Tensor::from_data({qfix.data.size()}, qfix.data);
  const double base = sal::supervised_loss(tq, tq, tf).item();
  bool beats = true;
  for (int t = 0; t < 1000; ++t) {
    geom::ErpGrid perturbed = q;
    for (double& v : perturbed.data) v = std::max(1e-9, v * (1.0 + uniform(rng, -0.3, 0.3)));
    sal::normalize_sum1(perturbed);
    const Tensor tp = Tensor::from_data({perturbed.data.size()}, perturbed.data);
    beats = beats && sal::supervised_loss(tp, tq, tf).item() > base;
  }
  c.require(beats, "ground truth beats 1000 perturbations");
  return finish("metric identities", c, timer, 30.0);
}

CheckResult check_ambisonics() {
  Timer timer;
  Claims c;
  Rng rng(31);
  audio::MonoClip s;
  s.sample_rate = 48000.0;
  s.samples.resize(256);
  for (auto& v : s.samples) v = uniform(rng, -0.5, 0.5);

  const audio::FoaClip foa = audio::encode_sources({{s, {0.4, 1.0}}, {s, {-0.6, -2.2}}});
  double worst_comp = 0.0, worst_energy = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double y1 = uniform(rng, -geom::kPi, geom::kPi), p1 = uniform(rng, -1.5, 1.5),
                 r1 = uniform(rng, -geom::kPi, geom::kPi);
    const double y2 = uniform(rng, -geom::kPi, geom::kPi), p2 = uniform(rng, -1.5, 1.5),
                 r2 = uniform(rng, -geom::kPi, geom::kPi);
    const audio::FoaClip chained = audio::rotate_foa(audio::rotate_foa(foa, y1, p1, r1), y2, p2, r2);
    const audio::FoaClip direct = audio::rotate_foa_matrix(
        foa, audio::mat3_mul(audio::foa_rotation(y2, p2, r2), audio::foa_rotation(y1, p1, r1)));
    for (int ch = 0; ch < 4; ++ch) {
      for (std::size_t i = 0; i < foa.length(); ++i) {
        worst_comp = std::max(worst_comp, std::abs(chained.channels[ch][i] - direct.channels[ch][i]));
      }
    }
    for (std::size_t i = 0; i < foa.length(); ++i) {
      double e0 = 0.0, e1 = 0.0;
      for (int ch = 0; ch < 4; ++ch) {
        e0 += foa.channels[ch][i] * foa.channels[ch][i];
        e1 += chained.channels[ch][i] * chained.channels[ch][i];
      }
      worst_energy = std::max(worst_energy, std::abs(e1 - e0));
    }
  }
  c.require(worst_comp < 1e-9, "rotation composition within 1e-9");
  c.require(worst_energy < 1e-9, "channel energy invariant within 1e-9");

  audio::FoaClip unit;
  unit.sample_rate = 48000.0;
  unit.w().assign(8, 1.0);
  unit.x().assign(8, 1.0);
  unit.y().assign(8, 0.0);
  unit.z().assign(8, 0.0);
  const audio::MonoClip dec = audio::decode_forward(unit);
  bool eq1 = true;
  for (double v : dec.samples) eq1 = eq1 && std::abs(v - 2.0 * (std::sqrt(2.0) + 1.0)) < 1e-12;
  c.require(eq1, "decode of W=X=1 gives 2(sqrt(2)+1)");

  bool cardioid = true;
  for (int k = 0; k < 50; ++k) {
    const geom::SphericalCoord d{std::asin(uniform(rng, -1.0, 1.0)), uniform(rng, -geom::kPi, geom::kPi)};
    const double yaw = uniform(rng, -geom::kPi, geom::kPi), pitch = uniform(rng, -1.5, 1.5);
    const audio::FoaClip rot = audio::rotate_foa(audio::encode_sources({{s, d}}), yaw, pitch, 0.0);
    const audio::Mat3 r = audio::foa_rotation(yaw, pitch, 0.0);
    const geom::Vec3 u = geom::to_unit(d);
    const double cg = r[0] * u.x + r[1] * u.y + r[2] * u.z;
    const audio::MonoClip out = audio::decode_forward(rot);
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
      cardioid = cardioid && std::abs(out.samples[i] - 2.0 * (1.0 + cg) * s.samples[i]) < 1e-9;
    }
  }
  c.require(cardioid, "encode-rotate-decode follows 2(1+cos gamma)");

  const geom::ViewportLayout layout = geom::default_layout();
  bool rms_ok = true;
  for (std::size_t target : {std::size_t{2}, std::size_t{9}, std::size_t{16}}) {
    const audio::FoaClip src = audio::encode_sources({{s, layout.centers[target]}});
    const auto waves = audio::viewport_waveforms(src, layout);
    std::size_t best = 0;
    double best_rms = -1.0;
    for (std::size_t t = 0; t < waves.size(); ++t) {
      double acc = 0.0;
      for (double v : waves[t].samples) acc += v * v;
      if (acc > best_rms) {
        best_rms = acc;
        best = t;
      }
    }
    rms_ok = rms_ok && best == target;
  }
  c.require(rms_ok, "source at a viewport center maximizes that viewport's RMS");
  return finish("ambisonics", c, timer, 30.0);
}

CheckResult check_no_audio_degradation() {
  Timer timer;
  Claims c;
  net::NetConfig cfg = net::micro_config();
  cfg.frames = 2;
  cfg.depth = 2;
  fusion::AvConfig av;
  av.audio_dim = 16;
  av.bottleneck = 4;
  av.mlp_hidden = 32;
  geom::ViewportLayout layout = geom::rings_layout({{-30.0, 2}, {30.0, 2}}, 110.0, cfg.patch);
  fusion::AvSaliencyModel model(cfg, av, layout);
  Rng rng(37);
  model.init_params(rng);
  for (int b = 0; b < cfg.depth; ++b) {
    ag::init::normal(model.params().at("adapter" + std::to_string(b) + ".w_up"), rng, 0.0, 0.3);
  }
  std::vector<std::vector<Tensor>> patches(cfg.frames);
  for (auto& per_frame : patches) {
    for (std::size_t t = 0; t < layout.count(); ++t) {
      std::vector<double> data(3 * 16 * 16);
      for (auto& v : data) v = uniform(rng, 0.0, 1.0);
      per_frame.push_back(Tensor::from_data({3, 16, 16}, std::move(data)));
    }
  }
  const Tensor vis = model.visual().forward_from_patches(patches);
  const Tensor no_audio = model.forward_from_patches(patches, std::nullopt);
  c.require(no_audio.values() == vis.values(), "absent audio is bitwise the visual path");

  audio::MonoClip tone;
  tone.sample_rate = 32000.0;
  tone.samples.resize(16000);
  for (std::size_t i = 0; i < tone.samples.size(); ++i) {
    tone.samples[i] = 0.5 * std::sin(2.0 * geom::kPi * 500.0 * i / 32000.0);
  }
  const audio::FoaClip foa = audio::encode_sources({{tone, layout.centers[1]}});
  const auto pooled = model.pooled_audio(foa);
  const Tensor with_audio = model.forward_from_patches(patches, pooled);
  bool differs = false;
  for (std::size_t i = 0; i < vis.size(); ++i) {
    differs = differs || with_audio.values()[i] != vis.values()[i];
  }
  c.require(differs, "active adapters with audio change the output");

  for (int b = 0; b < cfg.depth; ++b) {
    ag::init::zeros(model.params().at("adapter" + std::to_string(b) + ".s"));
  }
  const Tensor zero_scale = model.forward_from_patches(patches, pooled);
  c.require(zero_scale.values() == vis.values(), "s=0 with audio is bitwise the visual path");
  return finish("no-audio degradation", c, timer, 10.0);
}

CheckResult check_idt() {
  Timer timer;
  Claims c;
  Rng rng(41);
  const geom::SphericalCoord a{geom::deg_to_rad(5.0), geom::deg_to_rad(20.0)};
  const geom::SphericalCoord b{geom::deg_to_rad(5.0), geom::deg_to_rad(30.0)};
  std::vector<gaze::GazeSample> trace;
  for (double t = 0.0; t <= 0.3 + 1e-12; t += 0.01) {
    const double jl = geom::deg_to_rad(uniform(rng, -0.2, 0.2));
    const double jo = geom::deg_to_rad(uniform(rng, -0.2, 0.2));
    trace.push_back({t, geom::canonical({a.lat + jl, a.lon + jo})});
  }
  trace.push_back({0.315, geom::canonical({geom::deg_to_rad(5.0), geom::deg_to_rad(25.0)})});
  for (double t = 0.33; t <= 0.63 + 1e-12; t += 0.01) {
    const double jl = geom::deg_to_rad(uniform(rng, -0.2, 0.2));
    const double jo = geom::deg_to_rad(uniform(rng, -0.2, 0.2));
    trace.push_back({t, geom::canonical({b.lat + jl, b.lon + jo})});
  }
  const auto fx = gaze::idt_fixations(trace);
  c.require(fx.size() == 2, "exactly two fixations");
  if (fx.size() == 2) {
    // Construction centroids: mean of the jittered cluster samples.
    auto cluster_centroid = [&](double t0, double t1) {
      geom::Vec3 acc;
      for (const auto& g : trace) {
        if (g.timestamp >= t0 - 1e-9 && g.timestamp <= t1 + 1e-9) {
          const geom::Vec3 u = geom::to_unit(g.direction);
          acc.x += u.x;
          acc.y += u.y;
          acc.z += u.z;
        }
      }
      return geom::to_spherical(acc);
    };
    const double tol = geom::deg_to_rad(0.01);
    c.require(geom::angular_distance(fx[0].centroid, cluster_centroid(0.0, 0.3)) < tol,
              "first centroid within 0.01 deg of construction");
    c.require(geom::angular_distance(fx[1].centroid, cluster_centroid(0.33, 0.63)) < tol,
              "second centroid within 0.01 deg of construction");
    for (const auto& f : fx) {
      double disp = 0.0;
      std::vector<geom::SphericalCoord> members;
      for (const auto& g : trace) {
        if (g.timestamp >= f.start - 1e-9 && g.timestamp <= f.start + f.duration + 1e-9) {
          members.push_back(g.direction);
        }
      }
      for (std::size_t i = 0; i < members.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
          disp = std::max(disp, geom::angular_distance(members[i], members[j]));
        }
      }
      c.require(disp <= geom::deg_to_rad(1.5) + 1e-12, "fixation dispersion <= 1.5 deg");
    }
  }
  return finish("I-DT fixation extraction", c, timer, 5.0);
}

CheckResult check_vqa() {
  Timer timer;
  Claims c;
  Rng rng(43);
  geom::ErpGrid ref(16, 1);
  for (double& v : ref.data) v = static_cast<double>(uniform_int(rng, 0, 255));
  geom::ErpGrid imp = ref;
  for (double& v : imp.data) v = std::clamp(v + uniform(rng, -6.0, 6.0), 0.0, 255.0);
  geom::ErpGrid uni(16, 1, 0.73);

  double mse = 0.0;
  for (std::size_t i = 0; i < ref.data.size(); ++i) {
    mse += (ref.data[i] - imp.data[i]) * (ref.data[i] - imp.data[i]);
  }
  mse /= static_cast<double>(ref.data.size());
  const double plain_psnr = 10.0 * std::log10(255.0 * 255.0 / mse);
  c.require(std::abs(vqa::weighted_psnr(ref, imp, uni) - plain_psnr) < 1e-9,
            "uniform saliency equals plain PSNR within 1e-9 dB");

  double wsum = 0.0, esum = 0.0;
  for (int i = 0; i < 16; ++i) {
    const double w = std::cos(geom::kPi / 2.0 - geom::kPi * (i + 0.5) / 16.0);
    for (int j = 0; j < 32; ++j) {
      const double d = ref.at(0, i, j) - imp.at(0, i, j);
      wsum += w;
      esum += d * d * w;
    }
  }
  const double plain_ws = 10.0 * std::log10(255.0 * 255.0 * wsum / esum);
  c.require(std::abs(vqa::weighted_ws_psnr(ref, imp, uni) - plain_ws) < 1e-9,
            "uniform saliency equals plain WS-PSNR within 1e-9 dB");

  geom::ErpGrid sal(16, 1);
  for (double& v : sal.data) v = uniform(rng, 0.01, 1.0);
  geom::ErpGrid sal4 = sal;
  for (double& v : sal4.data) v *= 4.0;
  c.require(vqa::weighted_psnr(ref, imp, sal4) == vqa::weighted_psnr(ref, imp, sal) &&
                vqa::weighted_ws_psnr(ref, imp, sal4) == vqa::weighted_ws_psnr(ref, imp, sal),
            "positive-scale invariance of saliency weights holds exactly");
  return finish("saliency-weighted video quality", c, timer, 5.0);
}

CheckResult check_forward_determinism(int jobs) {
  Timer timer;
  Claims c;
  net::NetConfig cfg = net::micro_config();
  cfg.frames = 2;
  cfg.erp_height = 32;
  geom::ViewportLayout layout = geom::augmented_layout(geom::AugmentKind::kCoarse);
  layout.patch_size = cfg.patch;
  net::SaliencyModel model(cfg, layout);
  Rng rng(47);
  model.init_params(rng);
  std::vector<geom::ErpGrid> clip;
  for (int f = 0; f < 2; ++f) {
    geom::ErpGrid g(32, 3);
    for (int i = 0; i < g.height; ++i) {
      for (int j = 0; j < g.width; ++j) {
        const auto coord = g.pixel_center(i, j);
        for (int ch = 0; ch < 3; ++ch) {
          g.at(ch, i, j) = 0.4 + 0.3 * std::cos(coord.lat) * std::cos(coord.lon + 0.1 * f + ch);
        }
      }
    }
    clip.push_back(std::move(g));
  }
  const geom::ErpGrid a = model.forward(clip, 1);
  const geom::ErpGrid b = model.forward(clip, 1);
  const geom::ErpGrid d = model.forward(clip, jobs);
  c.require(a.data == b.data, "repeated forward is bitwise identical");
  c.require(a.data == d.data, "jobs=1 and jobs=N agree bitwise");
  return finish("forward determinism", c, timer, 30.0);
}

CheckResult check_toy_overfit(std::ostream* log) {
  Timer timer;
  Claims c;
  Rng rng(0);
  net::SaliencyModel model(toy::toy_net_config(), toy::toy_layout());
  model.init_params(rng);
  const auto data = toy::make_visual_dataset(model.config(), 2, rng);
  const auto report = toy::train_visual_toy(model, data, 2000, log, 200);
  c.require(report.loss_last < report.loss_first, "loss at step 2000 < loss at step 0");
  for (std::size_t k = 0; k < report.kld_per_clip.size(); ++k) {
    std::ostringstream what;
    what << "clip " << k << " kld < 0.5";
    c.require(report.kld_per_clip[k] < 0.5, what.str());
    std::ostringstream what2;
    what2 << "clip " << k << " cc > 0.8";
    c.require(report.cc_per_clip[k] > 0.8, what2.str());
  }
  std::ostringstream s;
  s << "loss " << report.loss_first << "->" << report.loss_last;
  for (std::size_t k = 0; k < report.kld_per_clip.size(); ++k) {
    s << " clip" << k << "(kld=" << report.kld_per_clip[k] << ",cc=" << report.cc_per_clip[k] << ")";
  }
  c.note(s.str());
  return finish("toy visual overfit", c, timer, 900.0);
}

CheckResult check_adapter_tuning(std::ostream* log) {
  Timer timer;
  Claims c;
  Rng rng(0);
  fusion::AvSaliencyModel model(toy::toy_net_config(), toy::toy_av_config(), toy::toy_layout());
  model.init_params(rng);
  const auto report = toy::train_adapter_toy(model, 200, rng, log);
  c.require(report.mass_after > report.mass_before,
            "mass in the sounding viewport strictly increases");
  c.require(report.frozen_intact, "frozen tensors bitwise unchanged");
  std::ostringstream s;
  s << "mass " << report.mass_before << "->" << report.mass_after << " loss " << report.loss_first
    << "->" << report.loss_last;
  c.note(s.str());
  return finish("toy adapter tuning", c, timer, 300.0);
}

std::vector<CheckResult> run_fast_checks(int jobs) {
  return {
      check_geometry_roundtrip(jobs), check_overlap_mask(jobs),   check_attention(),
      check_differentiability(),      check_metric_identities(),  check_ambisonics(),
      check_no_audio_degradation(),   check_idt(),                check_vqa(),
      check_forward_determinism(jobs),
  };
}

}  // namespace omnisal::check
