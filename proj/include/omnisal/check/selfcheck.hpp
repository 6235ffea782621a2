#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace omnisal::check {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

// Property/oracle checks behind both the `selftest` subcommand and the
// acceptance suite. Each check pins its tolerances in code.
CheckResult check_geometry_roundtrip(int jobs);    // criterion 1
CheckResult check_overlap_mask(int jobs);          // criterion 2
CheckResult check_attention();                     // criterion 3
CheckResult check_differentiability();             // criterion 4
CheckResult check_metric_identities();             // criterion 5
CheckResult check_ambisonics();                    // criterion 6
CheckResult check_no_audio_degradation();          // criterion 7
CheckResult check_idt();                           // criterion 10
CheckResult check_vqa();                           // criterion 11
CheckResult check_forward_determinism(int jobs);   // criterion 12 (in-process)

// Synthetic training runs (slow; acceptance criteria 8 and 9).
CheckResult check_toy_overfit(std::ostream* log = nullptr);
CheckResult check_adapter_tuning(std::ostream* log = nullptr);

// The fast set, in criterion order.
std::vector<CheckResult> run_fast_checks(int jobs);

}  // namespace omnisal::check
