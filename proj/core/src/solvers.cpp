#include "homog/solvers.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "homog/errors.hpp"
#include "homog/rng.hpp"
#include "homog/threading.hpp"

namespace homog {

namespace {

void check_finite(const Vec& x, const char* who) {
  for (double v : x)
    if (!std::isfinite(v)) throw NonFiniteState(std::string(who) + ": non-finite value");
}

void check_blowup(const Vec& x, double guard, long step, const char* who) {
  for (double v : x) {
    if (!std::isfinite(v) || std::fabs(v) > guard) {
      std::ostringstream os;
      os << who << ": trajectory blowup at step " << step;
      throw BlowupError(os.str());
    }
  }
}

}  // namespace

Vec Trajectory::at(long k) const {
  Vec out(d);
  for (int i = 0; i < d; ++i) out[i] = X[static_cast<size_t>(k) * d + i];
  return out;
}

Tensor3 fd_db(const SdeSystem& sde, const Vec& x) {
  static const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  Tensor3 out(static_cast<size_t>(sde.d) * sde.e * sde.d, 0.0);
  Vec xp = x, xm = x;
  for (int k = 0; k < sde.d; ++k) {
    const double h = h0 * (1.0 + std::fabs(x[k]));
    xp[k] = x[k] + h;
    xm[k] = x[k] - h;
    const Mat bp = sde.b(xp);
    const Mat bm = sde.b(xm);
    for (int i = 0; i < sde.d; ++i)
      for (int be = 0; be < sde.e; ++be)
        out[(static_cast<size_t>(i) * sde.e + be) * sde.d + k] = (bp(i, be) - bm(i, be)) / (2.0 * h);
    xp[k] = x[k];
    xm[k] = x[k];
  }
  return out;
}

std::function<Vec(const Vec&)> correction_drift(const SdeSystem& sde, const Mat& K) {
  if (K.rows() != sde.e || K.cols() != sde.e)
    throw DimensionMismatch("correction_drift: kernel must be e x e");
  return [sde, K](const Vec& x) {
    const Mat bx = sde.b(x);
    if (bx.rows() != sde.d || bx.cols() != sde.e)
      throw DimensionMismatch("correction_drift: b(x) must be d x e");
    const Tensor3 der = sde.db ? sde.db(x) : fd_db(sde, x);
    Vec c(sde.d, 0.0);
    for (int i = 0; i < sde.d; ++i) {
      double s = 0.0;
      for (int be = 0; be < sde.e; ++be)
        for (int ga = 0; ga < sde.e; ++ga) {
          const double k = K(be, ga);
          if (k == 0.0) continue;
          for (int al = 0; al < sde.d; ++al)
            s += k * der[(static_cast<size_t>(i) * sde.e + be) * sde.d + al] * bx(al, ga);
        }
      if (!std::isfinite(s)) throw NonFiniteState("correction_drift: non-finite derivative term");
      c[i] = s;
    }
    return c;
  };
}

Mat ito_kernel(const DiffusionStats& stats) { return transpose(stats.E); }

Mat stratonovich_kernel(const DiffusionStats& stats) {
  return 0.5 * transpose(stats.levy_area());
}

Trajectory solve_fast_discrete(const SdeSystem& sde, const PathPair& path) {
  if (path.meta.flow) throw InvalidParameter("solve_fast_discrete: path must be a discrete PathPair");
  if (path.stride != 1)
    throw InvalidParameter("solve_fast_discrete: the recursion needs a stride-1 path");
  if (path.dim != sde.e) throw DimensionMismatch("solve_fast_discrete: path dim != sde.e");

  const long K = path.points() - 1;
  const double inv_n = 1.0 / static_cast<double>(path.n);

  Trajectory tr;
  tr.d = sde.d;
  tr.scheme = "fast-discrete";
  tr.seed = path.meta.seed;
  tr.n = path.n;
  tr.t.reserve(K + 1);
  tr.X.reserve(static_cast<size_t>(K + 1) * sde.d);

  Vec x = sde.xi;
  Vec dW(sde.e);
  tr.t.push_back(0.0);
  for (int i = 0; i < sde.d; ++i) tr.X.push_back(x[i]);
  for (long j = 0; j < K; ++j) {
    for (int b = 0; b < sde.e; ++b)
      dW[b] = path.W[static_cast<size_t>(j + 1) * sde.e + b] - path.W[static_cast<size_t>(j) * sde.e + b];
    const Vec ax = sde.a ? sde.a(x) : Vec(sde.d, 0.0);
    const Mat bx = sde.b(x);
    for (int i = 0; i < sde.d; ++i) {
      double s = x[i] + inv_n * ax[i];
      for (int b = 0; b < sde.e; ++b) s += bx(i, b) * dW[b];
      x[i] = s;
    }
    check_blowup(x, 1e8, j, "solve_fast_discrete");
    tr.t.push_back(path.time_at(j + 1));
    for (int i = 0; i < sde.d; ++i) tr.X.push_back(x[i]);
  }
  return tr;
}

Vec fast_discrete_endpoint(const SdeSystem& sde, const DriverSystem& sys, const Observable& obs,
                           long n, double T, std::uint64_t seed) {
  if (sys.is_flow) throw WrongKind("fast_discrete_endpoint: driver must be a map");
  if (obs.dim != sde.e) throw DimensionMismatch("fast_discrete_endpoint: obs dim != sde.e");
  const long steps = static_cast<long>(std::floor(static_cast<double>(n) * T + 1e-9));
  const double inv_n = 1.0 / static_cast<double>(n);
  const double w_scale = 1.0 / std::sqrt(static_cast<double>(n));

  DriverState s = sample_initial(sys, seed);
  Vec x = sde.xi;
  std::vector<double> v(sde.e);
  for (long j = 0; j < steps; ++j) {
    obs.eval(s, v.data());
    const Vec ax = sde.a ? sde.a(x) : Vec(sde.d, 0.0);
    const Mat bx = sde.b(x);
    for (int i = 0; i < sde.d; ++i) {
      double acc = x[i] + inv_n * ax[i];
      for (int b = 0; b < sde.e; ++b) acc += bx(i, b) * (w_scale * v[b]);
      x[i] = acc;
    }
    check_blowup(x, 1e8, j, "fast_discrete_endpoint");
    s = step(sys, s);
  }
  return x;
}

Trajectory solve_fast_flow(const SdeSystem& sde, const DriverSystem& sys, const Observable& obs,
                           long n, double T, double quad_dt, std::uint64_t seed) {
  if (!sys.is_flow) throw WrongKind("solve_fast_flow: driver must be a flow or suspension");
  if (obs.dim != sde.e) throw DimensionMismatch("solve_fast_flow: obs dim != sde.e");
  if (!(quad_dt > 0.0)) throw InvalidParameter("solve_fast_flow: quad_dt must be > 0");

  const double h = quad_dt / static_cast<double>(n);      // slow-time step
  const long K = static_cast<long>(std::floor(T / h + 1e-9));
  const double amp = std::sqrt(static_cast<double>(n));   // dW_n/dt = n^{1/2} v

  Trajectory tr;
  tr.d = sde.d;
  tr.scheme = "fast-flow-heun";
  tr.seed = seed;
  tr.n = n;
  tr.dt = h;
  tr.t.reserve(K + 1);
  tr.X.reserve(static_cast<size_t>(K + 1) * sde.d);

  DriverState s = sample_initial(sys, seed);
  std::vector<double> v0(sde.e), v1(sde.e);
  obs.eval(s, v0.data());

  auto rhs = [&](const Vec& x, const std::vector<double>& v) {
    Vec f = sde.a ? sde.a(x) : Vec(sde.d, 0.0);
    const Mat bx = sde.b(x);
    for (int i = 0; i < sde.d; ++i)
      for (int b = 0; b < sde.e; ++b) f[i] += bx(i, b) * amp * v[b];
    return f;
  };

  Vec x = sde.xi;
  tr.t.push_back(0.0);
  for (int i = 0; i < sde.d; ++i) tr.X.push_back(x[i]);
  for (long k = 0; k < K; ++k) {
    s = flow_step(sys, s, quad_dt);
    obs.eval(s, v1.data());
    const Vec f0 = rhs(x, v0);
    Vec xp(sde.d);
    for (int i = 0; i < sde.d; ++i) xp[i] = x[i] + h * f0[i];
    const Vec f1 = rhs(xp, v1);
    for (int i = 0; i < sde.d; ++i) x[i] += 0.5 * h * (f0[i] + f1[i]);
    check_blowup(x, 1e8, k, "solve_fast_flow");
    tr.t.push_back(static_cast<double>(k + 1) * h);
    for (int i = 0; i < sde.d; ++i) tr.X.push_back(x[i]);
    std::swap(v0, v1);
  }
  return tr;
}

std::vector<Trajectory> solve_limit_sde(const SdeSystem& sde, const DiffusionStats& stats,
                                        SdeScheme scheme, double dt, long n_paths,
                                        std::uint64_t seed, const SdeRunOptions& opts) {
  if (!(dt > 0.0)) throw InvalidParameter("solve_limit_sde: dt must be > 0");
  if (stats.dim != sde.e) throw DimensionMismatch("solve_limit_sde: stats dim != sde.e");
  double clip = 0.0;
  const Mat A = psd_sqrt(stats.sigma, &clip);
  if (clip > 1e-8 * (1.0 + max_abs(stats.sigma)))
    throw InvalidParameter("solve_limit_sde: sigma is not PSD (clip the estimate first)");

  std::function<Vec(const Vec&)> corr;
  if (opts.apply_correction) {
    corr = correction_drift(sde, scheme == SdeScheme::ItoEuler ? ito_kernel(stats)
                                                               : stratonovich_kernel(stats));
  }
  auto drift = [&](const Vec& x) {
    Vec f = sde.a ? sde.a(x) : Vec(sde.d, 0.0);
    if (corr) {
      const Vec c = corr(x);
      for (int i = 0; i < sde.d; ++i) f[i] += c[i];
    }
    return f;
  };

  const long steps = std::llround(opts.T / dt);
  const double sdt = std::sqrt(dt);
  const char* tag = scheme == SdeScheme::ItoEuler ? "ito-euler" : "strat-heun";

  std::vector<Trajectory> out(n_paths);
  parallel_for(n_paths, opts.threads, [&](long pi) {
    std::mt19937_64 eng = make_engine(seed, static_cast<std::uint64_t>(pi));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Trajectory tr;
    tr.d = sde.d;
    tr.scheme = tag;
    tr.seed = derive_seed(seed, static_cast<std::uint64_t>(pi));
    tr.dt = dt;
    Vec x = sde.xi;
    std::vector<double> xi_buf(sde.e), dW(sde.e);
    if (opts.store_grid) {
      tr.t.reserve(steps + 1);
      tr.X.reserve(static_cast<size_t>(steps + 1) * sde.d);
      tr.t.push_back(0.0);
      for (int i = 0; i < sde.d; ++i) tr.X.push_back(x[i]);
    }
    for (long k = 0; k < steps; ++k) {
      for (int b = 0; b < sde.e; ++b) xi_buf[b] = gauss(eng);
      for (int b = 0; b < sde.e; ++b) {
        double acc = 0.0;
        for (int g = 0; g < sde.e; ++g) acc += A(b, g) * xi_buf[g];
        dW[b] = sdt * acc;
      }
      if (scheme == SdeScheme::ItoEuler) {
        const Vec f = drift(x);
        const Mat bx = sde.b(x);
        for (int i = 0; i < sde.d; ++i) {
          double s = x[i] + dt * f[i];
          for (int b = 0; b < sde.e; ++b) s += bx(i, b) * dW[b];
          x[i] = s;
        }
      } else {
        // Heun predictor-corrector; the midpoint average of b supplies the
        // Stratonovich reading of the noise term.
        const Vec f0 = drift(x);
        const Mat b0 = sde.b(x);
        Vec xp(sde.d);
        for (int i = 0; i < sde.d; ++i) {
          double s = x[i] + dt * f0[i];
          for (int b = 0; b < sde.e; ++b) s += b0(i, b) * dW[b];
          xp[i] = s;
        }
        const Vec f1 = drift(xp);
        const Mat b1 = sde.b(xp);
        for (int i = 0; i < sde.d; ++i) {
          double s = x[i] + 0.5 * dt * (f0[i] + f1[i]);
          for (int b = 0; b < sde.e; ++b) s += 0.5 * (b0(i, b) + b1(i, b)) * dW[b];
          x[i] = s;
        }
      }
      check_blowup(x, opts.blowup_guard, k, "solve_limit_sde");
      if (opts.store_grid) {
        tr.t.push_back(static_cast<double>(k + 1) * dt);
        for (int i = 0; i < sde.d; ++i) tr.X.push_back(x[i]);
      }
    }
    if (!opts.store_grid) {
      tr.t = {0.0, opts.T};
      tr.X.resize(static_cast<size_t>(2) * sde.d);
      for (int i = 0; i < sde.d; ++i) tr.X[i] = sde.xi[i];
      for (int i = 0; i < sde.d; ++i) tr.X[static_cast<size_t>(sde.d) + i] = x[i];
    }
    out[pi] = std::move(tr);
  });
  return out;
}

SdeSystem mcshane_system() {
  SdeSystem s;
  s.d = 2;
  s.e = 2;
  s.name = "mcshane";
  s.a = nullptr;
  s.b = [](const Vec& x) {
    Mat b(2, 2);
    b(0, 0) = 1.0;
    b(1, 1) = x[0];
    return b;
  };
  s.db = [](const Vec&) {
    Tensor3 t(2 * 2 * 2, 0.0);
    // d b^{22} / d x_1 = 1, all else zero
    t[(1 * 2 + 1) * 2 + 0] = 1.0;
    return t;
  };
  s.xi = {0.0, 0.0};
  return s;
}

SdeSystem linear_system(const Mat& A, const Mat& B, const Vec& xi) {
  if (A.rows() != A.cols() || A.rows() != B.rows() || static_cast<int>(xi.size()) != A.rows())
    throw DimensionMismatch("linear_system: incompatible shapes");
  SdeSystem s;
  s.d = A.rows();
  s.e = B.cols();
  s.name = "linear";
  s.a = [A](const Vec& x) { return matvec(A, x); };
  s.b = [B](const Vec&) { return B; };
  s.db = [d = s.d, e = s.e](const Vec&) { return Tensor3(static_cast<size_t>(d) * e * d, 0.0); };
  s.xi = xi;
  return s;
}

void write_trajectory_csv(const Trajectory& tr, const std::string& filename) {
  std::ofstream out(filename, std::ios::binary);
  if (!out) throw Error("write_trajectory_csv: cannot open " + filename);
  out << "t";
  for (int i = 1; i <= tr.d; ++i) out << ",X_" << i;
  out << "\n";
  char buf[32];
  for (long k = 0; k < tr.points(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", tr.t[k]);
    out << buf;
    for (int i = 0; i < tr.d; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", tr.X[static_cast<size_t>(k) * tr.d + i]);
      out << ',' << buf;
    }
    out << "\n";
  }
}

void write_endpoints_csv(const std::vector<Vec>& endpoints, int d, const std::string& filename) {
  std::ofstream out(filename, std::ios::binary);
  if (!out) throw Error("write_endpoints_csv: cannot open " + filename);
  out << "trajectory";
  for (int i = 1; i <= d; ++i) out << ",X_" << i;
  out << "\n";
  char buf[32];
  for (size_t k = 0; k < endpoints.size(); ++k) {
    out << k;
    for (int i = 0; i < d; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", endpoints[k][i]);
      out << ',' << buf;
    }
    out << "\n";
  }
}

}  // namespace homog
