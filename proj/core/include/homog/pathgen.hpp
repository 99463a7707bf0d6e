#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "homog/drivers.hpp"
#include "homog/linalg.hpp"

namespace homog {

struct PathMeta {
  std::string driver;
  std::string observable;
  long n = 1;
  double T = 0.0;
  std::uint64_t seed = 0;
  bool flow = false;
  double quad_dt = 0.0;  // flow paths only
};

// A sampled realization of (W_n, WW_n) on a uniform grid. W(0) = WW(0) = 0.
// Discrete paths use the left-Riemann convention
//   W_n(t)      = n^{-1/2} sum_{j < [nt]} v(f^j x)
//   WW_n^{bg}(t)= n^{-1}   sum_{0 <= i < j <= [nt]-1} v^b(f^i x) v^g(f^j x)
// (strict i < j: diagonal terms are excluded; this is where the
// Ito-vs-Stratonovich discrepancy lives, so it is pinned here once).
// Flow paths use trapezoidal quadrature for W and the matching trapezoid
// rule for WW = int W dW.
struct PathPair {
  long n = 1;
  double T = 0.0;
  double grid_dt = 0.0;  // slow-time spacing of stored points
  int dim = 1;
  long stride = 1;       // stored every `stride` raw steps (discrete paths)
  std::vector<double> W;   // (points) x dim, row-major
  std::vector<double> WW;  // (points) x dim x dim, row-major
  PathMeta meta;

  long points() const { return static_cast<long>(W.size()) / dim; }
  double time_at(long k) const { return static_cast<double>(k) * grid_dt; }
  // Index of a stored grid time; throws OffGridTime when t is not stored.
  long index_of(double t) const;

  Vec W_at(long k) const;
  Mat WW_at(long k) const;
};

struct PathOptions {
  long stride = 1;
  long step_cap = 200000000;  // overflow guard on [nT]
  std::optional<DriverState> initial;  // fixed start instead of sample_initial
};

// Single-orbit pass maintaining the running Birkhoff sum, O([nT] e^2) work.
PathPair discrete_path(const DriverSystem& sys, const Observable& obs, long n, double T,
                       std::uint64_t seed, const PathOptions& opts = {});

// W_n by trapezoidal quadrature of v along the flow at fast-time step
// quad_dt (slow-time step quad_dt/n), WW_n by the matching trapezoid rule.
PathPair flow_path(const DriverSystem& sys, const Observable& obs, long n, double T,
                   double quad_dt, std::uint64_t seed, const PathOptions& opts = {});

// Discretized Brownian pair with increment covariance sigma/n and
// left-Riemann iterated sums; the control ensemble for moment calibration.
PathPair brownian_pair(const Mat& sigma, long n, double T, std::uint64_t seed);

// Endpoint (W(T), WW(T)) without storing the grid.
struct PairEndpoint {
  Vec W;
  Mat WW;
};
PairEndpoint iterated_endpoint(const DriverSystem& sys, const Observable& obs, long n, double T,
                               std::uint64_t seed, const PathOptions& opts = {});

// Increment pair (W(s,t), WW(s,t)) with
//   W(s,t)  = W(t) - W(s)
//   WW(s,t) = WW(t) - WW(s) - W(s) (x) (W(t) - W(s)).
std::pair<Vec, Mat> increment(const PathPair& path, double s, double t);

// Chen-relation defect WW(s,t) - WW(s,u) - WW(u,t) - W(s,u) (x) W(u,t);
// zero up to rounding for every stored path.
Mat chen_defect(const PathPair& path, double s, double u, double t);

// CSV (t, W_1..W_e, WW_11..WW_ee) with 17 significant digits, and a JSON
// manifest carrying the meta block.
void write_path_csv(const PathPair& path, const std::string& filename);
PathPair read_path_csv(const std::string& filename);
void write_path_manifest(const PathPair& path, const std::string& filename);

}  // namespace homog
