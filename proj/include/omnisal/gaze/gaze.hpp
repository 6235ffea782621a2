#pragma once

#include <string>
#include <vector>

#include "omnisal/geometry/erp_grid.hpp"
#include "omnisal/geometry/spherical.hpp"

namespace omnisal::gaze {

struct GazeSample {
  double timestamp = 0.0;  // seconds, strictly increasing within a trace
  geom::SphericalCoord direction;
};

struct Fixation {
  double start = 0.0;
  double duration = 0.0;
  geom::SphericalCoord centroid;
};

struct IdtParams {
  double max_dispersion_deg = 1.5;
  double min_duration_s = 0.1;
};

// Dispersion-threshold fixation identification on the sphere. Dispersion of
// a window is the maximum pairwise great-circle angle; windows grow while it
// stays under the threshold and emit a fixation once they span the minimum
// duration. Windows never overlap.
std::vector<Fixation> idt_fixations(const std::vector<GazeSample>& trace,
                                    const IdtParams& params = {});

// Spherical Gaussian splat of every fixation, exp(-gamma^2 / (2 sigma^2))
// with gamma the great-circle angle to the centroid; normalized to sum 1.
geom::ErpGrid density_map(const std::vector<Fixation>& fixations, int erp_height, int erp_width,
                          double sigma_deg = 1.0);

// Binary map with a 1 at each fixation's centroid pixel.
geom::ErpGrid fixation_map(const std::vector<Fixation>& fixations, int erp_height, int erp_width);

struct WindowScore {
  double window_start = 0.0;
  double score = 0.0;
  int subjects_used = 0;
};

// Leave-one-out agreement per time window: each subject's window density map
// is correlated (Pearson) against the pooled map of the remaining subjects;
// the score is the mean over subjects. Windows where fewer than two subjects
// fixated are skipped.
std::vector<WindowScore> inter_subject_consistency(
    const std::vector<std::vector<Fixation>>& per_subject, int erp_height, int erp_width,
    double window_s = 2.0, double sigma_deg = 1.0);

// CSV schemas: gaze traces `timestamp_s,lat_deg,lon_deg`; fixations
// `subject_id,start_s,duration_s,lat_deg,lon_deg`. LF line ends.
std::vector<GazeSample> read_gaze_csv(const std::string& path);
void write_fixation_csv(const std::string& path, const std::string& subject_id,
                        const std::vector<Fixation>& fixations);
std::vector<std::pair<std::string, Fixation>> read_fixation_csv(const std::string& path);

}  // namespace omnisal::gaze
