#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "homog/drivers.hpp"
#include "homog/linalg.hpp"
#include "homog/pathgen.hpp"

namespace homog {

enum class EstimatorMethod { GreenKuboDiscrete, GreenKuboFlow, Induced, Ensemble };

std::string method_name(EstimatorMethod m);

// Inducing data for suspension flows: mean roof, base-map drift matrix and
// the fiber cross term int H^b v^g dnu.
struct InducedData {
  double rbar = 0.0;
  Mat tilde_E;
  Mat H_term;
};

// Estimated diffusion and drift matrices.
//   sigma        symmetrized, PSD after eigenvalue clipping (clip recorded)
//   E            raw drift matrix
//   D            2E - sigma, an arithmetic identity of the stored values
// The Levy-area matrix used downstream is the antisymmetric part of D; the
// symmetric residual is reported and never silently dropped.
struct DiffusionStats {
  int dim = 0;
  Mat sigma;
  Mat E;
  Mat D;
  Mat stderr_sigma;
  Mat stderr_E;
  long lag_L = 0;
  long n_samples = 0;
  EstimatorMethod method = EstimatorMethod::GreenKuboDiscrete;
  double psd_clip_magnitude = 0.0;
  bool lag_cap_hit = false;
  bool tail_warning = false;
  double tail_ratio = 0.0;
  bool bartlett = false;
  std::uint64_t seed = 0;
  std::optional<InducedData> induced;

  Mat levy_area() const { return antisymmetric_part(D); }
  Mat sym_residual() const { return symmetric_part(D); }
  // Entrywise stderr_E + stderr_sigma, the scale for antisymmetry checks.
  Mat combined_se() const { return stderr_E + stderr_sigma; }

  std::string to_json(int indent = 2) const;
};

struct GkOptions {
  int n_batches = 50;
  int lag_cap = 200;
  bool bartlett = false;  // Bartlett taper for slowly mixing maps
  long burn_in = -1;
};

// Discrete-time Green-Kubo estimate from one long orbit:
//   C_r^{bg} = int v^b v^g o f^r dmu   (lagged autocovariance)
//   Sigma    = C_0 + sum_{r=1..L} (C_r + C_r^T)
//   E        = sum_{r=1..L} C_r
// lag_L <= 0 selects the adaptive truncation: the smallest r whose next five
// consecutive lags are all below 2 SE entrywise, capped at lag_cap.
// Standard errors by batch means.
DiffusionStats green_kubo_discrete(const DriverSystem& sys, const Observable& obs, int lag_L,
                                   long orbit_len, std::uint64_t seed, const GkOptions& opts = {});

struct GkFlowOptions {
  double corr_dt = 0.0;  // correlation sampling/lag step; 0 -> max(quad_dt, t_max/400)
  int n_batches = 50;
  double tail_threshold = 0.01;
  long burn_in = -1;
};

// Continuous-time Green-Kubo estimate for flow/suspension drivers:
//   C(t)^{bg} = int v^b v^g o phi_t dnu, estimated on a lag grid by
//   time-averaging along one long orbit, then
//   Sigma = int_0^tmax (C + C^T) dt,  D = int_0^tmax (C - C^T) dt  (trapezoid)
//   E     = (Sigma + D) / 2.
// Sets tail_warning when |C(t_max)| exceeds tail_threshold of its peak
// (the integrals need not converge for general flows).
DiffusionStats green_kubo_flow(const DriverSystem& sys, const Observable& obs, double t_max,
                               double quad_dt, double orbit_time, std::uint64_t seed,
                               const GkFlowOptions& opts = {});

struct InducedOptions {
  GkOptions gk;
  int fiber_panels = 16;  // quadrature panels per unit roof height
};

// Inducing estimate on a suspension: compute vtilde(x) = int_0^r(x) v(x,u) du
// along fibers, run the discrete estimator on vtilde over the base map, and
// assemble Sigma = rbar^{-1} Sigma~, E = rbar^{-1} E~ + int H^b v^g dnu.
DiffusionStats induced_stats(const DriverSystem& sys, const Observable& obs, long orbit_len,
                             std::uint64_t seed, const InducedOptions& opts = {});

// Ensemble mean and standard error of WW_n(1) over a homogeneous collection
// of paths (same n, T >= 1, driver and observable; at least 100 members).
std::pair<Mat, Mat> ensemble_E(const std::vector<PathPair>& paths);

// Streaming variant: generates trajectory endpoints itself (trajectory i is
// seeded from (seed, i), so results are independent of scheduling).
struct EnsembleEResult {
  Mat mean;
  Mat sem;
  long n_paths = 0;
};
EnsembleEResult ensemble_E_streaming(const DriverSystem& sys, const Observable& obs, long n,
                                     long n_paths, std::uint64_t seed, int threads = 1);

// D = 2E - sigma.
Mat drift_matrices(const Mat& sigma, const Mat& E);

DiffusionStats stats_from_json(const std::string& text);

}  // namespace homog
