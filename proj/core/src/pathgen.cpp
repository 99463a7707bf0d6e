#include "homog/pathgen.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "homog/errors.hpp"
#include "homog/rng.hpp"

namespace homog {

namespace {

long floor_nt(long n, double T) {
  return static_cast<long>(std::floor(static_cast<double>(n) * T + 1e-9));
}

void check_steps(long steps, long cap) {
  if (steps > cap) {
    std::ostringstream os;
    os << "path generation: [nT] = " << steps << " exceeds the configured step cap " << cap;
    throw InvalidParameter(os.str());
  }
}

// Shared accumulation core for discrete pairs. Record is called with the
// stored index after W/WW have been brought up to raw step j.
template <typename Record>
void run_discrete_pair(const DriverSystem& sys, const Observable& obs, long n, double /*T*/,
                       std::uint64_t seed, long steps, Record&& record, long stride,
                       const std::optional<DriverState>& initial = std::nullopt) {
  const int e = obs.dim;
  DriverState s = initial ? *initial : sample_initial(sys, seed);
  std::vector<double> v(e), V(e, 0.0), S(static_cast<size_t>(e) * e, 0.0);
  const double w_scale = 1.0 / std::sqrt(static_cast<double>(n));
  const double ww_scale = 1.0 / static_cast<double>(n);

  for (long j = 0; j <= steps; ++j) {
    if (j % stride == 0 || j == steps) record(j, V, S, w_scale, ww_scale);
    if (j == steps) break;
    obs.eval(s, v.data());
    for (int b = 0; b < e; ++b) {
      const double Vb = V[b];
      for (int g = 0; g < e; ++g) S[static_cast<size_t>(b) * e + g] += Vb * v[g];
    }
    for (int b = 0; b < e; ++b) V[b] += v[b];
    s = step(sys, s);
  }
}

}  // namespace

long PathPair::index_of(double t) const {
  if (grid_dt <= 0.0) throw OffGridTime("PathPair: empty grid");
  const double u = t / grid_dt;
  const long k = std::llround(u);
  if (k < 0 || k >= points() || std::fabs(u - static_cast<double>(k)) > 1e-9 * std::max(1.0, std::fabs(u))) {
    std::ostringstream os;
    os << "time " << t << " is not on the stored grid (dt = " << grid_dt << ")";
    throw OffGridTime(os.str());
  }
  return k;
}

Vec PathPair::W_at(long k) const {
  Vec out(dim);
  for (int i = 0; i < dim; ++i) out[i] = W[static_cast<size_t>(k) * dim + i];
  return out;
}

Mat PathPair::WW_at(long k) const {
  Mat out(dim, dim);
  const size_t base = static_cast<size_t>(k) * dim * dim;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) out(i, j) = WW[base + static_cast<size_t>(i) * dim + j];
  return out;
}

PathPair discrete_path(const DriverSystem& sys, const Observable& obs, long n, double T,
                       std::uint64_t seed, const PathOptions& opts) {
  if (sys.is_flow) throw WrongKind("discrete_path: driver is a flow; use flow_path");
  if (n < 1) throw InvalidParameter("discrete_path: n must be >= 1");
  if (!(T > 0.0)) throw InvalidParameter("discrete_path: T must be > 0");
  if (opts.stride < 1) throw InvalidParameter("discrete_path: stride must be >= 1");
  const long steps = floor_nt(n, T);
  check_steps(steps, opts.step_cap);
  if (steps % opts.stride)
    throw InvalidParameter("discrete_path: stride must divide [nT] so the stored grid stays uniform");

  PathPair p;
  p.n = n;
  p.T = T;
  p.dim = obs.dim;
  p.stride = opts.stride;
  p.grid_dt = static_cast<double>(opts.stride) / static_cast<double>(n);
  p.meta = {sys.name(), obs.name, n, T, seed, false, 0.0};

  const int e = obs.dim;
  const long stored = steps / opts.stride + 1;
  p.W.reserve(static_cast<size_t>(stored) * e);
  p.WW.reserve(static_cast<size_t>(stored) * e * e);

  run_discrete_pair(
      sys, obs, n, T, seed, steps,
      [&](long /*j*/, const std::vector<double>& V, const std::vector<double>& S, double ws, double wws) {
        for (int b = 0; b < e; ++b) p.W.push_back(ws * V[b]);
        for (size_t i = 0; i < S.size(); ++i) p.WW.push_back(wws * S[i]);
      },
      opts.stride, opts.initial);
  return p;
}

PairEndpoint iterated_endpoint(const DriverSystem& sys, const Observable& obs, long n, double T,
                               std::uint64_t seed, const PathOptions& opts) {
  if (sys.is_flow) throw WrongKind("iterated_endpoint: driver is a flow");
  const long steps = floor_nt(n, T);
  check_steps(steps, opts.step_cap);
  PairEndpoint out;
  out.W.assign(obs.dim, 0.0);
  out.WW = Mat(obs.dim, obs.dim);
  run_discrete_pair(
      sys, obs, n, T, seed, steps,
      [&](long j, const std::vector<double>& V, const std::vector<double>& S, double ws, double wws) {
        if (j != steps) return;
        for (int b = 0; b < obs.dim; ++b) out.W[b] = ws * V[b];
        for (int b = 0; b < obs.dim; ++b)
          for (int g = 0; g < obs.dim; ++g) out.WW(b, g) = wws * S[static_cast<size_t>(b) * obs.dim + g];
      },
      steps > 0 ? steps : 1, opts.initial);
  return out;
}

PathPair flow_path(const DriverSystem& sys, const Observable& obs, long n, double T,
                   double quad_dt, std::uint64_t seed, const PathOptions& opts) {
  if (!sys.is_flow) throw WrongKind("flow_path: driver is a map; use discrete_path");
  if (!(quad_dt > 0.0)) throw InvalidParameter("flow_path: quad_dt must be > 0");
  if (sys.kind == SystemKind::Lorenz && quad_dt < sys.lorenz.dt_internal)
    throw InvalidParameter("flow_path: quad_dt must be >= dt_internal for lorenz");
  if (n < 1) throw InvalidParameter("flow_path: n must be >= 1");
  if (!(T > 0.0)) throw InvalidParameter("flow_path: T must be > 0");

  const double h = quad_dt / static_cast<double>(n);  // slow-time step
  const long K = static_cast<long>(std::floor(T / h + 1e-9));
  check_steps(K, opts.step_cap);

  const int e = obs.dim;
  PathPair p;
  p.n = n;
  p.T = static_cast<double>(K) * h;
  p.dim = e;
  p.grid_dt = h;
  p.meta = {sys.name(), obs.name, n, p.T, seed, true, quad_dt};
  p.W.reserve(static_cast<size_t>(K + 1) * e);
  p.WW.reserve(static_cast<size_t>(K + 1) * e * e);

  DriverState s = opts.initial ? *opts.initial : sample_initial(sys, seed);
  std::vector<double> v_prev(e), v(e), W(e, 0.0), WWacc(static_cast<size_t>(e) * e, 0.0);
  obs.eval(s, v_prev.data());

  const double w_scale = std::sqrt(static_cast<double>(n)) * h;  // n^{-1/2} quad_dt

  for (int b = 0; b < e; ++b) p.W.push_back(0.0);
  for (int i = 0; i < e * e; ++i) p.WW.push_back(0.0);

  std::vector<double> dW(e);
  for (long k = 1; k <= K; ++k) {
    s = flow_step(sys, s, quad_dt);
    obs.eval(s, v.data());
    for (int b = 0; b < e; ++b) dW[b] = 0.5 * w_scale * (v_prev[b] + v[b]);
    for (int b = 0; b < e; ++b)
      for (int g = 0; g < e; ++g)
        WWacc[static_cast<size_t>(b) * e + g] += (W[b] + 0.5 * dW[b]) * dW[g];
    for (int b = 0; b < e; ++b) W[b] += dW[b];
    for (int b = 0; b < e; ++b) {
      if (!std::isfinite(W[b])) throw NonFiniteState("flow_path: non-finite path value");
      p.W.push_back(W[b]);
    }
    for (int i = 0; i < e * e; ++i) p.WW.push_back(WWacc[i]);
    std::swap(v, v_prev);
  }
  return p;
}

PathPair brownian_pair(const Mat& sigma, long n, double T, std::uint64_t seed) {
  const int e = sigma.rows();
  Mat A = psd_sqrt(sigma);
  const long steps = floor_nt(n, T);

  PathPair p;
  p.n = n;
  p.T = T;
  p.dim = e;
  p.grid_dt = 1.0 / static_cast<double>(n);
  p.meta = {"brownian", "gaussian-increments", n, T, seed, false, 0.0};
  p.W.reserve(static_cast<size_t>(steps + 1) * e);
  p.WW.reserve(static_cast<size_t>(steps + 1) * e * e);

  std::mt19937_64 eng = make_engine(seed, 0xBB);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sdt = std::sqrt(1.0 / static_cast<double>(n));

  std::vector<double> xi(e), dW(e), W(e, 0.0), S(static_cast<size_t>(e) * e, 0.0);
  for (int b = 0; b < e; ++b) p.W.push_back(0.0);
  for (int i = 0; i < e * e; ++i) p.WW.push_back(0.0);
  for (long j = 0; j < steps; ++j) {
    for (int b = 0; b < e; ++b) xi[b] = gauss(eng);
    for (int b = 0; b < e; ++b) {
      double a = 0.0;
      for (int g = 0; g < e; ++g) a += A(b, g) * xi[g];
      dW[b] = sdt * a;
    }
    for (int b = 0; b < e; ++b)
      for (int g = 0; g < e; ++g) S[static_cast<size_t>(b) * e + g] += W[b] * dW[g];  // left endpoint
    for (int b = 0; b < e; ++b) W[b] += dW[b];
    for (int b = 0; b < e; ++b) p.W.push_back(W[b]);
    for (int i = 0; i < e * e; ++i) p.WW.push_back(S[i]);
  }
  return p;
}

std::pair<Vec, Mat> increment(const PathPair& path, double s, double t) {
  const long ks = path.index_of(s);
  const long kt = path.index_of(t);
  if (ks > kt) throw InvalidParameter("increment: s must be <= t");
  const Vec Ws = path.W_at(ks), Wt = path.W_at(kt);
  const Mat WWs = path.WW_at(ks), WWt = path.WW_at(kt);
  Vec dW(path.dim);
  for (int i = 0; i < path.dim; ++i) dW[i] = Wt[i] - Ws[i];
  Mat dWW = WWt - WWs - outer(Ws, dW);
  return {dW, dWW};
}

Mat chen_defect(const PathPair& path, double s, double u, double t) {
  const long ks = path.index_of(s), ku = path.index_of(u), kt = path.index_of(t);
  if (!(ks <= ku && ku <= kt)) throw InvalidParameter("chen_defect: need s <= u <= t");
  auto [Wsu, WWsu] = increment(path, s, u);
  auto [Wut, WWut] = increment(path, u, t);
  auto [Wst, WWst] = increment(path, s, t);
  (void)Wst;
  return WWst - WWsu - WWut - outer(Wsu, Wut);
}

void write_path_csv(const PathPair& path, const std::string& filename) {
  std::ofstream out(filename, std::ios::binary);  // binary: pin LF line endings
  if (!out) throw Error("write_path_csv: cannot open " + filename);
  const int e = path.dim;
  out << "t";
  for (int i = 1; i <= e; ++i) out << ",W_" << i;
  for (int i = 1; i <= e; ++i)
    for (int j = 1; j <= e; ++j) out << ",WW_" << i << j;
  out << "\n";
  char buf[32];
  const long K = path.points();
  for (long k = 0; k < K; ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", path.time_at(k));
    out << buf;
    for (int i = 0; i < e; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", path.W[static_cast<size_t>(k) * e + i]);
      out << ',' << buf;
    }
    for (int i = 0; i < e * e; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", path.WW[static_cast<size_t>(k) * e * e + i]);
      out << ',' << buf;
    }
    out << "\n";
  }
}

PathPair read_path_csv(const std::string& filename) {
  std::ifstream in(filename);
  if (!in) throw Error("read_path_csv: cannot open " + filename);
  std::string header;
  std::getline(in, header);
  int e = 0;
  {
    // columns: t, e W's, e^2 WW's
    int commas = 0;
    for (char c : header)
      if (c == ',') ++commas;
    for (int cand = 1; cand <= 16; ++cand)
      if (cand + cand * cand == commas) e = cand;
    if (e == 0) throw Error("read_path_csv: unrecognized column layout");
  }
  PathPair p;
  p.dim = e;
  std::vector<double> times;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    times.push_back(std::stod(cell));
    for (int i = 0; i < e; ++i) {
      std::getline(ls, cell, ',');
      p.W.push_back(std::stod(cell));
    }
    for (int i = 0; i < e * e; ++i) {
      std::getline(ls, cell, ',');
      p.WW.push_back(std::stod(cell));
    }
  }
  if (times.size() >= 2) p.grid_dt = times[1] - times[0];
  p.T = times.empty() ? 0.0 : times.back();
  return p;
}

void write_path_manifest(const PathPair& path, const std::string& filename) {
  nlohmann::json j;
  j["driver"] = path.meta.driver;
  j["observable"] = path.meta.observable;
  j["n"] = path.meta.n;
  j["T"] = path.meta.T;
  j["seed"] = path.meta.seed;
  j["flow"] = path.meta.flow;
  j["quad_dt"] = path.meta.quad_dt;
  j["dim"] = path.dim;
  j["grid_dt"] = path.grid_dt;
  j["stride"] = path.stride;
  j["points"] = path.points();
  std::ofstream out(filename, std::ios::binary);
  if (!out) throw Error("write_path_manifest: cannot open " + filename);
  out << j.dump(2) << "\n";
}

}  // namespace homog
