#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "homog/linalg.hpp"

namespace homog {

enum class SystemKind { Doubling, PomeauManneville, CatMap, Lorenz, Suspension };

std::string kind_name(SystemKind k);

struct LorenzParams {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
  double dt_internal = 0.005;
};

// Affine roof function r(x) = c0 + c1 * x1 over the base map's first
// coordinate. Built-in roofs are affine; validation requires r bounded
// below by a strictly positive constant on the base domain.
struct Roof {
  double c0 = 1.0;
  double c1 = 0.0;
  double operator()(double x1) const { return c0 + c1 * x1; }
  double lower_bound() const { return c1 >= 0.0 ? c0 : c0 + c1; }  // x1 in [0,1)
  double upper_bound() const { return c1 >= 0.0 ? c0 + c1 : c0; }
};

struct SystemSpec {
  SystemKind kind = SystemKind::Doubling;
  double pm_alpha = 0.0;
  LorenzParams lorenz;
  std::shared_ptr<SystemSpec> base;  // suspension base (map kind)
  Roof roof;
};

// Exact orbits for binary-expansion maps. Doubling and cat-map iteration in
// plain floating point collapses onto the fixed point 0 after ~55 steps (the
// map is a mantissa shift), so their states live on the rational lattice
// { k/m : 0 <= k < m } with m prime and 2 a primitive root mod m. The map is
// then an exact permutation of the lattice with period m-1 ~ 4.6e18, and
// lattice values round to the same doubles a direct evaluation would give.
inline constexpr std::uint64_t kLatticeModulus = 4611686018427377339ULL;

std::uint64_t to_lattice(double x);
double from_lattice(std::uint64_t k);

struct DriverState {
  std::array<double, 3> x{0.0, 0.0, 0.0};
  int dim = 1;
  std::array<std::uint64_t, 2> lat{0, 0};
  bool has_lattice = false;
  double height = 0.0;      // suspension fiber coordinate u in [0, r(x))
  std::uint64_t laps = 0;   // cumulative base-map returns of a suspension orbit
};

struct DriverSystem {
  SystemKind kind = SystemKind::Doubling;
  int state_dim = 1;
  bool is_flow = false;
  double pm_alpha = 0.0;
  LorenzParams lorenz;
  std::shared_ptr<const DriverSystem> base;  // suspension only
  Roof roof;

  // Maps with exact lattice orbits (doubling, cat, PM with alpha = 0).
  bool uses_lattice() const;
  // False in the alpha >= 1/2 regime where Green-Kubo series are nonsummable.
  bool estimable() const;
  std::string name() const;
};

DriverSystem make_system(const SystemSpec& spec);

// Construct a state from raw coordinates (attaching exact lattice words for
// the binary maps). For suspensions, `height` is the fiber coordinate.
DriverState make_state(const DriverSystem& sys, const std::vector<double>& point, double height = 0.0);

// One iteration of a map-kind system (suspension base maps advance through
// flow_step; calling step on a suspension advances its base map directly).
DriverState step(const DriverSystem& sys, const DriverState& s);

// Advance a flow (Lorenz: fixed-step RK4 at dt_internal, landing exactly on
// t+dt; suspension: unit-speed fiber motion with base-map returns at roof
// crossings).
DriverState flow_step(const DriverSystem& sys, const DriverState& s, double dt);

struct SampleOptions {
  long burn_in = -1;  // <0: kind default (1e4 map steps, 2e4 Lorenz internal steps)
};

// Draw an initial condition approximately distributed by the physical
// invariant measure: uniform start in the reference box plus burn-in.
// Deterministic given (seed, burn_in).
DriverState sample_initial(const DriverSystem& sys, std::uint64_t seed, long burn_in = -1);

struct Observable {
  enum class Centering { Analytic, Empirical };

  int dim = 1;
  std::function<void(const DriverState&, double*)> eval_raw;
  Vec offset;  // subtracted from the raw evaluation
  Centering mode = Centering::Analytic;
  long center_samples = 0;
  std::uint64_t center_seed = 0;
  std::string name = "custom";

  void eval(const DriverState& s, double* out) const {
    eval_raw(s, out);
    for (int i = 0; i < dim; ++i) out[i] -= offset[i];
  }
  Vec eval(const DriverState& s) const {
    Vec v(dim);
    eval(s, v.data());
    return v;
  }
};

// Built-in observables by name:
//   cos2pi     e=1  cos(2 pi x1)
//   cos4pi     e=1  cos(4 pi x1)
//   fourier2   e=2  (cos 2 pi x1, cos 4 pi x1)
//   fourier2s  e=2  (cos 4 pi x1, cos 2 pi x1)
//   cat-trig2  e=2  (cos 2 pi x1, cos 2 pi (x1+x2))
//   coords2    e=2  (x1, x2)        -- center empirically before estimating
//   coord1     e=1  x1              -- center empirically before estimating
Observable make_observable(const std::string& name);
std::vector<std::string> observable_names();

// Empirical (Birkhoff-average) centering over an orbit of length n_samples
// from one burned-in initial condition; analytic mode passes the offset
// through untouched.
Observable center_observable(const DriverSystem& sys, const Observable& raw, long n_samples,
                             std::uint64_t seed);

}  // namespace homog
