#include "homog/drivers.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "homog/errors.hpp"
#include "homog/rng.hpp"

namespace homog {

namespace {

constexpr std::uint64_t kM = kLatticeModulus;

std::uint64_t add_mod(std::uint64_t a, std::uint64_t b) {
  // a, b < m < 2^62, so a+b never wraps.
  std::uint64_t s = a + b;
  if (s >= kM) s -= kM;
  return s;
}

std::uint64_t dbl_mod(std::uint64_t a) { return add_mod(a, a); }

bool finite3(const double* x, int n) {
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(x[i])) return false;
  return true;
}

void lorenz_rhs(const LorenzParams& p, const double* x, double* dx) {
  dx[0] = p.sigma * (x[1] - x[0]);
  dx[1] = x[0] * (p.rho - x[2]) - x[1];
  dx[2] = x[0] * x[1] - p.beta * x[2];
}

void lorenz_rk4(const LorenzParams& p, double* x, double dt) {
  double k1[3], k2[3], k3[3], k4[3], tmp[3];
  lorenz_rhs(p, x, k1);
  for (int i = 0; i < 3; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
  lorenz_rhs(p, tmp, k2);
  for (int i = 0; i < 3; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
  lorenz_rhs(p, tmp, k3);
  for (int i = 0; i < 3; ++i) tmp[i] = x[i] + dt * k3[i];
  lorenz_rhs(p, tmp, k4);
  for (int i = 0; i < 3; ++i) x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

std::string kind_name(SystemKind k) {
  switch (k) {
    case SystemKind::Doubling: return "doubling";
    case SystemKind::PomeauManneville: return "pomeau-manneville";
    case SystemKind::CatMap: return "cat";
    case SystemKind::Lorenz: return "lorenz";
    case SystemKind::Suspension: return "suspension";
  }
  return "?";
}

std::uint64_t to_lattice(double x) {
  if (x < 0.0 || x >= 1.0) throw InvalidParameter("to_lattice: point must lie in [0,1)");
  if (x == 0.0) return 0;
  int exp;
  const double fr = std::frexp(x, &exp);  // x = fr * 2^exp, fr in [0.5, 1)
  const auto mant = static_cast<std::uint64_t>(std::ldexp(fr, 53));  // exact, < 2^53
  const int shift = 53 - exp;  // x = mant / 2^shift, shift >= 53
  if (shift >= 127) return 0;  // below lattice resolution
  const unsigned __int128 prod = static_cast<unsigned __int128>(mant) * kM;
  const unsigned __int128 half = static_cast<unsigned __int128>(1) << (shift - 1);
  std::uint64_t k = static_cast<std::uint64_t>((prod + half) >> shift);
  if (k >= kM) k -= kM;
  return k;
}

double from_lattice(std::uint64_t k) {
  // long double (64-bit mantissa on x86-64) keeps the quotient accurate enough
  // that the final rounding to double matches the true rational k/m.
  return static_cast<double>(static_cast<long double>(k) / static_cast<long double>(kM));
}

bool DriverSystem::uses_lattice() const {
  return kind == SystemKind::Doubling || kind == SystemKind::CatMap ||
         (kind == SystemKind::PomeauManneville && pm_alpha == 0.0);
}

bool DriverSystem::estimable() const {
  if (kind == SystemKind::PomeauManneville) return pm_alpha < 0.5;
  if (kind == SystemKind::Suspension) return base->estimable();
  return true;
}

std::string DriverSystem::name() const {
  std::ostringstream os;
  os << kind_name(kind);
  if (kind == SystemKind::PomeauManneville) os << "(alpha=" << pm_alpha << ")";
  if (kind == SystemKind::Suspension)
    os << "[" << base->name() << "; roof=" << roof.c0 << "+" << roof.c1 << "x]";
  return os.str();
}

DriverSystem make_system(const SystemSpec& spec) {
  DriverSystem sys;
  sys.kind = spec.kind;
  switch (spec.kind) {
    case SystemKind::Doubling:
      sys.state_dim = 1;
      sys.is_flow = false;
      break;
    case SystemKind::PomeauManneville:
      if (!(spec.pm_alpha >= 0.0 && spec.pm_alpha < 1.0))
        throw InvalidParameter("make_system: pomeau-manneville alpha must lie in [0,1)");
      sys.pm_alpha = spec.pm_alpha;
      sys.state_dim = 1;
      sys.is_flow = false;
      break;
    case SystemKind::CatMap:
      sys.state_dim = 2;
      sys.is_flow = false;
      break;
    case SystemKind::Lorenz:
      if (!(spec.lorenz.dt_internal > 0.0 && spec.lorenz.dt_internal <= 0.05))
        throw InvalidParameter("make_system: lorenz dt_internal must lie in (0, 0.05]");
      sys.lorenz = spec.lorenz;
      sys.state_dim = 3;
      sys.is_flow = true;
      break;
    case SystemKind::Suspension: {
      if (!spec.base) throw InvalidParameter("make_system: suspension base missing");
      DriverSystem b = make_system(*spec.base);
      if (b.is_flow) throw InvalidParameter("make_system: suspension base must be a map kind");
      if (!(spec.roof.lower_bound() > 0.0))
        throw InvalidParameter("make_system: suspension roof must be bounded below by a positive constant");
      sys.base = std::make_shared<DriverSystem>(std::move(b));
      sys.roof = spec.roof;
      sys.state_dim = sys.base->state_dim;
      sys.is_flow = true;
      break;
    }
  }
  return sys;
}

DriverState make_state(const DriverSystem& sys, const std::vector<double>& point, double height) {
  const DriverSystem& dom = sys.kind == SystemKind::Suspension ? *sys.base : sys;
  if (static_cast<int>(point.size()) != dom.state_dim)
    throw InvalidParameter("make_state: point dimension does not match state_dim");
  DriverState s;
  s.dim = dom.state_dim;
  for (int i = 0; i < s.dim; ++i) s.x[i] = point[i];
  if (dom.kind != SystemKind::Lorenz) {
    for (int i = 0; i < s.dim; ++i)
      if (!(point[i] >= 0.0 && point[i] < 1.0))
        throw InvalidParameter("make_state: map states lie in [0,1) per coordinate");
  } else if (!finite3(s.x.data(), 3)) {
    throw NonFiniteState("make_state: non-finite lorenz state");
  }
  if (dom.uses_lattice()) {
    for (int i = 0; i < s.dim; ++i) s.lat[i] = to_lattice(point[i]);
    s.has_lattice = true;
  }
  if (sys.kind == SystemKind::Suspension) {
    const double r = sys.roof(s.x[0]);
    if (!(height >= 0.0 && height < r))
      throw InvalidParameter("make_state: suspension height must lie in [0, roof(x))");
    s.height = height;
  }
  return s;
}

namespace {

// One base-map iteration; `sys` must be a map kind.
DriverState map_step(const DriverSystem& sys, const DriverState& s) {
  DriverState out = s;
  switch (sys.kind) {
    case SystemKind::Doubling: {
      if (s.has_lattice) {
        out.lat[0] = dbl_mod(s.lat[0]);
        out.x[0] = from_lattice(out.lat[0]);
      } else {
        double y = 2.0 * s.x[0];
        if (y >= 1.0) y -= 1.0;
        out.x[0] = y;
      }
      break;
    }
    case SystemKind::PomeauManneville: {
      if (sys.pm_alpha == 0.0) {
        // alpha = 0 reduces to the doubling map; keep the exact orbit.
        if (s.has_lattice) {
          out.lat[0] = dbl_mod(s.lat[0]);
          out.x[0] = from_lattice(out.lat[0]);
        } else {
          double y = 2.0 * s.x[0];
          if (y >= 1.0) y -= 1.0;
          out.x[0] = y;
        }
        break;
      }
      const double x = s.x[0];
      double y;
      if (x < 0.5) {
        y = x * (1.0 + std::pow(2.0 * x, sys.pm_alpha));  // x (1 + 2^a x^a)
      } else {
        y = 2.0 * x - 1.0;
      }
      if (y >= 1.0) y = std::nextafter(1.0, 0.0);
      if (y < 0.0) y = 0.0;
      out.x[0] = y;
      break;
    }
    case SystemKind::CatMap: {
      if (s.has_lattice) {
        const std::uint64_t j = s.lat[0], k = s.lat[1];
        out.lat[0] = add_mod(dbl_mod(j), k);  // 2x + y mod 1
        out.lat[1] = add_mod(j, k);           // x + y mod 1
        out.x[0] = from_lattice(out.lat[0]);
        out.x[1] = from_lattice(out.lat[1]);
      } else {
        double a = 2.0 * s.x[0] + s.x[1];
        double b = s.x[0] + s.x[1];
        out.x[0] = a - std::floor(a);
        out.x[1] = b - std::floor(b);
      }
      break;
    }
    default:
      throw WrongKind("map_step: not a map kind");
  }
  return out;
}

}  // namespace

DriverState step(const DriverSystem& sys, const DriverState& s) {
  if (sys.kind == SystemKind::Lorenz)
    throw WrongKind("step: lorenz is a flow; use flow_step");
  if (sys.kind == SystemKind::Suspension) {
    DriverState out = map_step(*sys.base, s);
    out.height = s.height;
    out.laps = s.laps + 1;
    return out;
  }
  return map_step(sys, s);
}

DriverState flow_step(const DriverSystem& sys, const DriverState& s, double dt) {
  if (!(dt > 0.0)) throw InvalidParameter("flow_step: dt must be > 0");
  switch (sys.kind) {
    case SystemKind::Lorenz: {
      DriverState out = s;
      const double h = sys.lorenz.dt_internal;
      const auto nsub = static_cast<long>(std::floor(dt / h + 1e-9));
      for (long i = 0; i < nsub; ++i) lorenz_rk4(sys.lorenz, out.x.data(), h);
      const double rem = dt - static_cast<double>(nsub) * h;
      if (rem > 1e-12 * dt) lorenz_rk4(sys.lorenz, out.x.data(), rem);
      if (!finite3(out.x.data(), 3))
        throw NonFiniteState("flow_step: lorenz integrator produced a non-finite state");
      return out;
    }
    case SystemKind::Suspension: {
      DriverState out = s;
      out.height += dt;
      double r = sys.roof(out.x[0]);
      while (out.height >= r) {
        out.height -= r;
        out = map_step(*sys.base, out);  // height and lap count carry through the copy
        out.laps += 1;
        r = sys.roof(out.x[0]);
      }
      return out;
    }
    default:
      throw WrongKind("flow_step: " + kind_name(sys.kind) + " is a map; use step");
  }
}

DriverState sample_initial(const DriverSystem& sys, std::uint64_t seed, long burn_in) {
  std::mt19937_64 eng = make_engine(seed, 0xB0);
  switch (sys.kind) {
    case SystemKind::Doubling:
    case SystemKind::CatMap:
    case SystemKind::PomeauManneville: {
      if (burn_in < 0) burn_in = 10000;
      DriverState s;
      s.dim = sys.state_dim;
      if (sys.uses_lattice()) {
        std::uniform_int_distribution<std::uint64_t> pick(1, kM - 1);
        for (int i = 0; i < s.dim; ++i) {
          s.lat[i] = pick(eng);
          s.x[i] = from_lattice(s.lat[i]);
        }
        s.has_lattice = true;
      } else {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        for (int i = 0; i < s.dim; ++i) {
          double x = u01(eng);
          if (x == 0.0) x = 0.5;
          s.x[i] = x;
        }
      }
      for (long i = 0; i < burn_in; ++i) s = map_step(sys, s);
      return s;
    }
    case SystemKind::Lorenz: {
      if (burn_in < 0) burn_in = 20000;  // 100 time units at the default step
      DriverState s;
      s.dim = 3;
      std::uniform_real_distribution<double> ux(-20.0, 20.0), uy(-30.0, 30.0), uz(0.0, 50.0);
      s.x = {ux(eng), uy(eng), uz(eng)};
      if (burn_in > 0) return flow_step(sys, s, static_cast<double>(burn_in) * sys.lorenz.dt_internal);
      return s;
    }
    case SystemKind::Suspension: {
      // Base point from the base invariant measure, reweighted by the roof
      // (the flow measure gives fiber x weight proportional to r(x)), then a
      // uniform height on the fiber.
      DriverState b = sample_initial(*sys.base, derive_seed(seed, 0xBA5E), burn_in);
      std::uniform_real_distribution<double> u01(0.0, 1.0);
      const double r_up = sys.roof.upper_bound();
      for (int tries = 0; tries < 4096; ++tries) {
        if (u01(eng) * r_up <= sys.roof(b.x[0])) break;
        for (int j = 0; j < 7; ++j) b = map_step(*sys.base, b);
      }
      DriverState s = b;
      s.height = u01(eng) * sys.roof(b.x[0]);
      s.laps = 0;
      return s;
    }
  }
  throw Error("sample_initial: unreachable");
}

Observable make_observable(const std::string& name) {
  Observable o;
  o.name = name;
  if (name == "cos2pi") {
    o.dim = 1;
    o.eval_raw = [](const DriverState& s, double* out) { out[0] = std::cos(kTwoPi * s.x[0]); };
  } else if (name == "cos4pi") {
    o.dim = 1;
    o.eval_raw = [](const DriverState& s, double* out) { out[0] = std::cos(2.0 * kTwoPi * s.x[0]); };
  } else if (name == "fourier2") {
    o.dim = 2;
    o.eval_raw = [](const DriverState& s, double* out) {
      out[0] = std::cos(kTwoPi * s.x[0]);
      out[1] = std::cos(2.0 * kTwoPi * s.x[0]);
    };
  } else if (name == "fourier2s") {
    o.dim = 2;
    o.eval_raw = [](const DriverState& s, double* out) {
      out[0] = std::cos(2.0 * kTwoPi * s.x[0]);
      out[1] = std::cos(kTwoPi * s.x[0]);
    };
  } else if (name == "cat-trig2") {
    o.dim = 2;
    o.eval_raw = [](const DriverState& s, double* out) {
      out[0] = std::cos(kTwoPi * s.x[0]);
      out[1] = std::cos(kTwoPi * (s.x[0] + s.x[1]));
    };
  } else if (name == "coords2") {
    o.dim = 2;
    o.eval_raw = [](const DriverState& s, double* out) {
      out[0] = s.x[0];
      out[1] = s.x[1];
    };
  } else if (name == "coord1") {
    o.dim = 1;
    o.eval_raw = [](const DriverState& s, double* out) { out[0] = s.x[0]; };
  } else {
    throw InvalidParameter("make_observable: unknown observable '" + name + "'");
  }
  o.offset.assign(o.dim, 0.0);
  return o;
}

std::vector<std::string> observable_names() {
  return {"cos2pi", "cos4pi", "fourier2", "fourier2s", "cat-trig2", "coords2", "coord1"};
}

Observable center_observable(const DriverSystem& sys, const Observable& raw, long n_samples,
                             std::uint64_t seed) {
  if (n_samples < 100000)
    throw InsufficientData("center_observable: n_samples must be >= 1e5 for empirical centering");
  Observable out = raw;
  DriverState s = sample_initial(sys, seed);
  std::vector<double> v(raw.dim);
  Vec mean(raw.dim, 0.0);
  const double sample_dt = sys.kind == SystemKind::Lorenz ? sys.lorenz.dt_internal : 0.05;
  for (long i = 0; i < n_samples; ++i) {
    raw.eval_raw(s, v.data());
    for (int k = 0; k < raw.dim; ++k) mean[k] += v[k];
    s = sys.is_flow ? flow_step(sys, s, sample_dt) : step(sys, s);
  }
  for (int k = 0; k < raw.dim; ++k) mean[k] /= static_cast<double>(n_samples);
  out.offset = mean;
  out.mode = Observable::Centering::Empirical;
  out.center_samples = n_samples;
  out.center_seed = seed;
  return out;
}

}  // namespace homog
