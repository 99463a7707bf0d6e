#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "homog/drivers.hpp"
#include "homog/linalg.hpp"
#include "homog/tolerances.hpp"

namespace homog {

// Two-sample Kolmogorov-Smirnov statistic with asymptotic critical values.
struct KsStat {
  double stat = 0.0;
  double crit5 = 0.0;  // 5% asymptotic critical value
  double crit1 = 0.0;  // 1% asymptotic critical value
  std::size_t n_a = 0, n_b = 0;
};

KsStat ks_two_sample(std::vector<double> a, std::vector<double> b);

// Per-coordinate KS statistics of two ensembles in R^d.
std::vector<KsStat> ks_distance(const std::vector<Vec>& a, const std::vector<Vec>& b);

// Moment-scaling check: least-squares log-log slopes of
//   || |W_n(0,t)| ||_{2p}   (expected ~ 1/2)  and
//   || |WW_n(0,t)| ||_{2p/3} (expected ~ 1)
// over an ensemble, for t on the given grid (spanning at least a decade).
struct MomentSlopeResult {
  bool defined = false;  // false when the observable is identically zero
  double slope_W = 0.0;
  double slope_WW = 0.0;
  int p = 2;
  std::vector<double> t;
  std::vector<double> norm_W;
  std::vector<double> norm_WW;
};

MomentSlopeResult moment_slope(const DriverSystem& sys, const Observable& obs, int p, long n,
                               const std::vector<double>& t_grid, long n_paths, std::uint64_t seed,
                               int threads = 1);

// Calibration control: the same statistics on exact Brownian pairs with
// increment covariance sigma/n and left-Riemann iterated sums.
MomentSlopeResult moment_slope_brownian(const Mat& sigma, long n, const std::vector<double>& t_grid,
                                        long n_paths, std::uint64_t seed, int p = 2, int threads = 1);

// An L^2-cohomologous pair: v = v_hat + chi o f - chi, constructed (never
// user-assembled) so the identity holds pointwise by construction.
struct CohomologyTriple {
  Observable v_hat;
  Observable chi;
  Observable v;
};

CohomologyTriple make_cohomology_triple(const DriverSystem& sys, const Observable& v_hat,
                                        const Observable& chi);

enum class PredictionMethod { OrbitAverage, Quadrature };

// Cohomological shift of iterated integrals:
//   observed  = (WW_n(T) - WW_hat_n(T)) / T on one orbit,
//   predicted = int chi^b v^g dmu - int vhat^b chi^g o f dmu.
// tolerance_scale is an orbit estimate of the CLT scale of the difference,
// so |observed - predicted| is expected to be O(n^{-1/2} * tolerance_scale).
struct CohomologyShift {
  Mat observed;
  Mat predicted;
  Mat tolerance_scale;
  long n = 0;
  double T = 0.0;
};

CohomologyShift cohomology_shift(const DriverSystem& sys, const CohomologyTriple& triple, long n,
                                 double T, std::uint64_t seed,
                                 PredictionMethod method = PredictionMethod::OrbitAverage,
                                 long predict_orbit_len = 10000000);

// Distribution comparison of fast-slow ensembles against the corrected and
// naive (uncorrected Wong-Zakai) limiting SDE ensembles at a common horizon.
struct LabeledEnsemble {
  long n = 0;       // scaling parameter label
  double T = 1.0;   // horizon
  std::vector<Vec> X;
};

struct EnsembleMoments {
  Vec mean;
  Vec mean_se;
  Mat cov;
};
EnsembleMoments ensemble_moments(const std::vector<Vec>& xs);

struct ComparisonEntry {
  long n = 0;
  std::vector<KsStat> vs_corrected;
  std::vector<KsStat> vs_naive;
  EnsembleMoments moments;
};

struct Verdict {
  std::string name;
  bool pass = false;
  std::string tolerance;  // named tolerance the verdict cites
  std::string detail;
};

struct ComparisonReport {
  double T = 1.0;
  int d = 0;
  std::vector<ComparisonEntry> fast;  // ascending n
  EnsembleMoments corrected;
  EnsembleMoments naive;
  bool correction_indistinguishable = false;
  std::vector<Verdict> verdicts;
  bool pass = false;
  std::string provenance_fast, provenance_corrected, provenance_naive;

  std::string to_json(int indent = 2) const;
  std::string to_text() const;
};

// levy_D / levy_D_se: the antisymmetric correction and its standard error,
// used to decide whether the corrected and naive laws are distinguishable.
ComparisonReport convergence_report(const std::vector<LabeledEnsemble>& fast_ensembles,
                                    const LabeledEnsemble& sde_corrected,
                                    const LabeledEnsemble& sde_naive, const Mat& levy_D,
                                    const Mat& levy_D_se, const ToleranceSet& tol = {});

// Empirical CDF curve of one coordinate, for plot-ready output.
std::vector<std::pair<double, double>> ecdf_curve(const std::vector<Vec>& xs, int coord);

}  // namespace homog
