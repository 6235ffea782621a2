#pragma once

#include "omnisal/tensor/tensor.hpp"

namespace omnisal::sal {

// Differentiable counterparts of the evaluation metrics, used as training
// objectives. Maps are flat or 2-D tensors of matching shape.

inline constexpr double kKldEps = 1e-7;
inline constexpr double kSmseAlpha = 0.05;

// sum a log(eps + a/(b+eps)), optionally weighted elementwise.
ag::Tensor kld_loss(const ag::Tensor& a, const ag::Tensor& b, const ag::Tensor& weight = {},
                    double eps = kKldEps);

// Mean-centered Pearson correlation (evaluation CC, differentiable).
ag::Tensor cc_loss(const ag::Tensor& a, const ag::Tensor& b);

// Min-max normalize both maps, mean squared difference on fixation pixels.
ag::Tensor smse_loss(const ag::Tensor& p, const ag::Tensor& q, const ag::Tensor& fix);

// kld(q_s, p) + (1 - cc(p, q_s)) + alpha * smse(p, q_s, q_f), alpha = 0.05.
ag::Tensor supervised_loss(const ag::Tensor& p, const ag::Tensor& q_s, const ag::Tensor& q_f);

// Weighted KLD plus one minus the weighted cosine similarity
//   1 - sum(a b w) / sqrt(sum(a^2) sum(b^2));
// an undefined weight tensor means all-ones.
ag::Tensor vac_loss(const ag::Tensor& y_main, const ag::Tensor& y_aug, const ag::Tensor& weight = {},
                    double eps = kKldEps);

}  // namespace omnisal::sal
