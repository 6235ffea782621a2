#pragma once

#include <string>
#include <vector>

#include "omnisal/geometry/erp_grid.hpp"

namespace omnisal::vqa {

inline constexpr double kYMax = 255.0;

// Saliency-weighted PSNR of one luma frame pair:
//   10 log10( Ymax^2 sum(w) / sum((Y - Y')^2 w) ).
// Lossless frames give +infinity.
double weighted_psnr(const geom::ErpGrid& reference, const geom::ErpGrid& impaired,
                     const geom::ErpGrid& saliency, double y_max = kYMax);

// Same with the combined weight w_sal(p) * cos(theta_p), theta_p the pixel
// latitude of the ERP grid.
double weighted_ws_psnr(const geom::ErpGrid& reference, const geom::ErpGrid& impaired,
                        const geom::ErpGrid& saliency, double y_max = kYMax);

struct VideoScores {
  std::vector<double> per_frame_wpsnr;
  std::vector<double> per_frame_wwspsnr;
  double mean_wpsnr = 0.0;   // arithmetic mean over frames in dB
  double mean_wwspsnr = 0.0;
};

VideoScores score_video(const std::vector<geom::ErpGrid>& reference,
                        const std::vector<geom::ErpGrid>& impaired,
                        const std::vector<geom::ErpGrid>& saliency);

// "inf" sentinel for lossless content, otherwise fixed-point dB.
std::string psnr_to_string(double db);

// Correlation utilities over paired score lists.
double pcc(const std::vector<double>& x, const std::vector<double>& y);
double srcc(const std::vector<double>& x, const std::vector<double>& y);  // average-rank ties
double rmse(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace omnisal::vqa
