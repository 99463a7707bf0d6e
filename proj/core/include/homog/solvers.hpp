#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "homog/drivers.hpp"
#include "homog/estimators.hpp"
#include "homog/linalg.hpp"
#include "homog/pathgen.hpp"

namespace homog {

// Derivatives of the diffusion matrix: entry (i, beta, k) = d b^{i beta} / d x_k,
// stored flat at [(i*e + beta)*d + k].
using Tensor3 = std::vector<double>;

// Slow-equation coefficients dX = a(X) dt + b(X) * dW with b: R^d -> R^{d x e}.
// `db` may be empty, in which case central finite differences are used.
struct SdeSystem {
  int d = 1;
  int e = 1;
  std::function<Vec(const Vec&)> a;
  std::function<Mat(const Vec&)> b;
  std::function<Tensor3(const Vec&)> db;
  Vec xi;
  std::string name = "custom";
};

// Central-difference derivative of b at x, step h = eps^{1/3} (1 + |x_k|).
Tensor3 fd_db(const SdeSystem& sde, const Vec& x);

// The Levy-area correction field applied literally with kernel K:
//   c_i(x) = sum_{a,b,g} K^{bg} * d b^{i b}/d x_a (x) * b^{a g}(x).
// Callers choose K; no hidden factors. For the limit SDEs the solver wires
// the kernel so the slow component driven by WW^{bg} picks up drift E^{bg}
// (see solve_limit_sde).
std::function<Vec(const Vec&)> correction_drift(const SdeSystem& sde, const Mat& K);

// Kernel wiring for the two limit-SDE forms. The drift required by the
// iterated-integral expansion contracts the transposed kernel through
// correction_drift, so:
//   Ito form:          total drift a + correction_drift(E^T)
//   Stratonovich form: total drift a + correction_drift((D/2)^T), D antisymmetric
Mat ito_kernel(const DiffusionStats& stats);
Mat stratonovich_kernel(const DiffusionStats& stats);

struct Trajectory {
  int d = 1;
  std::vector<double> t;
  std::vector<double> X;  // points x d, row-major; X(0) = xi exactly
  std::string scheme;
  std::uint64_t seed = 0;
  double dt = 0.0;
  long n = 0;

  long points() const { return static_cast<long>(t.size()); }
  Vec at(long k) const;
  Vec endpoint() const { return at(points() - 1); }
};

// Fast-slow recursion driven by a stored discrete path:
//   X_{j+1} = X_j + n^{-1} a(X_j) + b(X_j) (W((j+1)/n) - W(j/n)),  X_0 = xi.
Trajectory solve_fast_discrete(const SdeSystem& sde, const PathPair& path);

// Same recursion fused with orbit generation; returns only the endpoint.
Vec fast_discrete_endpoint(const SdeSystem& sde, const DriverSystem& sys, const Observable& obs,
                           long n, double T, std::uint64_t seed);

// Fast-slow ODE in slow time, dX/dt = a(X) + b(X) n^{1/2} v(phi_{nt} x0),
// integrated by Heun's method with the driver sampled at matching points.
Trajectory solve_fast_flow(const SdeSystem& sde, const DriverSystem& sys, const Observable& obs,
                           long n, double T, double quad_dt, std::uint64_t seed);

enum class SdeScheme { ItoEuler, StratHeun };

struct SdeRunOptions {
  double T = 1.0;
  bool store_grid = false;      // false: endpoints only
  bool apply_correction = true; // false: the naive Wong-Zakai comparator
  int threads = 1;
  double blowup_guard = 1e8;
};

// Monte Carlo integration of the limiting SDE. Brownian increments have
// covariance sigma*dt via a PSD square-root factor. ito-euler integrates the
// Ito form with drift a + correction(E); strat-heun the Stratonovich form
// with drift a + correction(D/2); the two target the same law.
std::vector<Trajectory> solve_limit_sde(const SdeSystem& sde, const DiffusionStats& stats,
                                        SdeScheme scheme, double dt, long n_paths,
                                        std::uint64_t seed, const SdeRunOptions& opts = {});

// Built-in slow systems.
//   mcshane: d=e=2, a=0, b = [[1,0],[0,x1]], xi=0; the slow component X^2
//            reproduces the iterated integral WW^{12} exactly.
//   linear:  a(x) = A x, b constant.
SdeSystem mcshane_system();
SdeSystem linear_system(const Mat& A, const Mat& B, const Vec& xi);

void write_trajectory_csv(const Trajectory& tr, const std::string& filename);
void write_endpoints_csv(const std::vector<Vec>& endpoints, int d, const std::string& filename);

}  // namespace homog
