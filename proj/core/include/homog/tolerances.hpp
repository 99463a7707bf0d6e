#pragma once

#include <string>
#include <vector>

namespace homog {

// Central tolerance registry. Every verdict emitted by the analysis layer
// cites one of these names.
struct ToleranceSet {
  double se_consistency = 3.0;   // "3se": cross-estimator agreement, oracle matches
  double se_antisym = 5.0;       // "5se": symmetric residual of raw 2E - Sigma
  double slope_w_tol = 0.05;     // "slope-w": moment slope for W about 1/2
  double slope_ww_tol = 0.10;    // "slope-ww": moment slope for WW about 1
  double ks_level = 0.01;        // "ks-1pct": verdicts use the 1% critical value
  double chen_rel = 1e-10;       // "chen": Chen-defect relative bound
  double mcshane_rel = 1e-12;    // "mcshane": structural identity bound
  double centering_se = 5.0;     // "centering": centered mean within 5 SE of zero
  double tail_ratio = 0.01;      // "gk-tail": flow correlation tail warning level
  double cohomology_factor = 10.0;  // "cohomology": observed vs predicted scale

  struct Named {
    std::string name;
    double value;
  };
  std::vector<Named> entries() const {
    return {{"3se", se_consistency},   {"5se", se_antisym},
            {"slope-w", slope_w_tol},  {"slope-ww", slope_ww_tol},
            {"ks-1pct", ks_level},     {"chen", chen_rel},
            {"mcshane", mcshane_rel},  {"centering", centering_se},
            {"gk-tail", tail_ratio},   {"cohomology", cohomology_factor}};
  }
};

}  // namespace homog
