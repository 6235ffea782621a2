#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "omnisal/common/error.hpp"
#include "omnisal/tensor/tensor.hpp"

namespace omnisal::ag {

namespace detail {

inline double rel_error(double analytic, double numeric) {
  if (!std::isfinite(analytic) || !std::isfinite(numeric)) {
    throw NumericError("grad_check: non-finite value encountered");
  }
  return std::abs(analytic - numeric) /
         std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

// Central difference with a retry ladder. A coordinate whose first estimate
// disagrees is re-tried at smaller steps (a relu-kink straddle vanishes once
// the step no longer crosses the kink) and at larger steps (on flat,
// zero-gradient directions the h-scale roundoff noise of the difference
// dominates, and shrinks as the step grows). A genuinely wrong gradient
// disagrees at every step and is still reported.
template <class Eval>
double fd_error(double analytic, double h, const Eval& eval) {
  double best = std::numeric_limits<double>::infinity();
  for (const double factor : {1.0, 0.5, 0.25, 8.0, 64.0, 512.0}) {
    const double step = h * factor;
    const double numeric = (eval(step) - eval(-step)) / (2.0 * step);
    best = std::min(best, rel_error(analytic, numeric));
    if (best < 1e-4) break;
  }
  return best;
}

}  // namespace detail

// Central finite-difference check of a scalar-valued tensor function against
// reverse-mode gradients. Returns the max over coordinates of
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
inline double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                         double h = 1e-6) {
  if (!x.requires_grad()) throw DataError("grad_check: x must require grad");
  x.zero_grad();
  Tensor loss = f(x);
  if (loss.size() != 1) throw ShapeError("grad_check: f must be scalar-valued");
  loss.backward();
  const std::vector<double> analytic = x.grad();

  double max_err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto eval = [&](double delta) {
      auto& xv = x.raw_values();
      const double saved = xv[i];
      xv[i] = saved + delta;
      const double v = f(x).item();
      xv[i] = saved;
      return v;
    };
    max_err = std::max(max_err, detail::fd_error(analytic[i], h, eval));
  }
  return max_err;
}

// Same check for a loss over several parameter tensors (for whole-model
// checks). `coord_stride` > 1 samples every n-th coordinate to bound runtime.
inline double grad_check_params(const std::function<Tensor()>& loss_fn,
                                std::vector<Tensor> params, double h = 1e-6,
                                std::size_t coord_stride = 1) {
  for (auto& p : params) p.zero_grad();
  Tensor loss = loss_fn();
  if (loss.size() != 1) throw ShapeError("grad_check_params: loss must be scalar");
  loss.backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    analytic.push_back(p.has_grad() ? p.grad() : std::vector<double>(p.size(), 0.0));
  }

  double max_err = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& xv = params[pi].raw_values();
    for (std::size_t i = 0; i < xv.size(); i += coord_stride) {
      auto eval = [&](double delta) {
        const double saved = xv[i];
        xv[i] = saved + delta;
        const double v = loss_fn().item();
        xv[i] = saved;
        return v;
      };
      max_err = std::max(max_err, detail::fd_error(analytic[pi][i], h, eval));
    }
  }
  return max_err;
}

}  // namespace omnisal::ag
