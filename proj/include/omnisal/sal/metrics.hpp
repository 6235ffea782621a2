#pragma once

#include <vector>

#include "omnisal/geometry/erp_grid.hpp"

namespace omnisal::sal {

// Evaluation metrics on plain saliency rasters. Saliency maps are 1-channel,
// non-negative; kld/sim expect sum-1 normalization; fixation maps are binary.

void normalize_sum1(geom::Raster& map);
bool is_sum1(const geom::Raster& map, double tol = 1e-4);
void check_fixation_map(const geom::Raster& fix);  // binary, >= 1 positive

// sum_i a_i * log(eps + a_i / (b_i + eps)); for evaluation call
// kld(ground_truth, prediction).
double kld(const geom::Raster& a, const geom::Raster& b, double eps = 1e-7);

// Pearson correlation of the mean-centered flattened maps.
double cc(const geom::Raster& a, const geom::Raster& b);

// Histogram intersection sum_i min(a_i, b_i).
double sim(const geom::Raster& a, const geom::Raster& b);

// Mean of the z-scored (population sigma) saliency at fixation pixels;
// constant maps return 0.
double nss(const geom::Raster& p, const geom::Raster& fix);

// Min-max normalize both maps to [0, 1], then mean squared difference over
// fixation pixels only.
double smse(const geom::Raster& p, const geom::Raster& q, const geom::Raster& fix);

}  // namespace omnisal::sal
