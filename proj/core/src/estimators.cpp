#include "homog/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "homog/errors.hpp"
#include "homog/rng.hpp"
#include "homog/stats.hpp"
#include "homog/threading.hpp"

namespace homog {

namespace {

void refuse_if_not_estimable(const DriverSystem& sys, const char* who) {
  if (!sys.estimable()) {
    std::ostringstream os;
    os << who << ": pomeau-manneville alpha >= 1/2 is the nonsummable-correlations regime; "
       << "Green-Kubo estimation refused (driver " << sys.name() << ")";
    throw NotEstimable(os.str());
  }
}

// Lagged autocovariance C_r of a mean-adjusted sample sequence, with
// per-batch values for batch-means standard errors. Batches are contiguous
// segments indexed by the left factor.
struct LagResult {
  Mat C;
  std::vector<Mat> batch;
};

LagResult lagged_cov(const std::vector<double>& v, long N, int e, long r, int n_batches) {
  LagResult out;
  out.C = Mat(e, e);
  out.batch.assign(n_batches, Mat(e, e));
  std::vector<double> counts(n_batches, 0.0);
  const long batch_len = N / n_batches;
  for (long i = 0; i + r < N; ++i) {
    const int b = static_cast<int>(std::min<long>(i / batch_len, n_batches - 1));
    const double* vi = &v[static_cast<size_t>(i) * e];
    const double* vj = &v[static_cast<size_t>(i + r) * e];
    Mat& acc = out.batch[b];
    for (int p = 0; p < e; ++p)
      for (int q = 0; q < e; ++q) acc(p, q) += vi[p] * vj[q];
    counts[b] += 1.0;
  }
  double total = 0.0;
  for (int b = 0; b < n_batches; ++b) {
    out.C += out.batch[b];
    total += counts[b];
    if (counts[b] > 0.0) out.batch[b] *= 1.0 / counts[b];
  }
  out.C *= 1.0 / total;
  return out;
}

Mat batch_sem(const std::vector<Mat>& batch) {
  const int e = batch.front().rows();
  Mat sem(e, e);
  for (int p = 0; p < e; ++p)
    for (int q = 0; q < batch.front().cols(); ++q) {
      RunningMeanVar acc;
      for (const Mat& m : batch) acc.add(m(p, q));
      sem(p, q) = acc.sem();
    }
  return sem;
}

void subtract_mean(std::vector<double>& v, long N, int e) {
  std::vector<double> mean(e, 0.0);
  for (long i = 0; i < N; ++i)
    for (int k = 0; k < e; ++k) mean[k] += v[static_cast<size_t>(i) * e + k];
  for (int k = 0; k < e; ++k) mean[k] /= static_cast<double>(N);
  for (long i = 0; i < N; ++i)
    for (int k = 0; k < e; ++k) v[static_cast<size_t>(i) * e + k] -= mean[k];
}

// Green-Kubo assembly shared by the discrete and induced estimators. The
// sample sequence is treated as the orbit of the centered observable.
struct GkCore {
  Mat sigma_raw, E;
  std::vector<Mat> sigma_batch, E_batch;
  long lag_L = 0;
  bool cap_hit = false;
};

GkCore gk_assemble(std::vector<double>& samples, long N, int e, int lag_L, const GkOptions& opts) {
  if (opts.n_batches < 2) throw InvalidParameter("green_kubo: need at least 2 batches");
  if (N < 200L * opts.n_batches)
    throw InsufficientData("green_kubo: orbit too short for batch-means standard errors");
  subtract_mean(samples, N, e);

  std::vector<LagResult> lags;  // lags[r] = C_r
  lags.push_back(lagged_cov(samples, N, e, 0, opts.n_batches));

  long L;
  bool cap_hit = false;
  if (lag_L > 0) {
    L = lag_L;
    for (long r = 1; r <= L; ++r) lags.push_back(lagged_cov(samples, N, e, r, opts.n_batches));
  } else {
    // Adaptive truncation: stop before the first run of five consecutive
    // lags that are all below 2 SE entrywise.
    long streak_start = -1;
    long streak = 0;
    long r = 1;
    for (; r <= opts.lag_cap + 5; ++r) {
      lags.push_back(lagged_cov(samples, N, e, r, opts.n_batches));
      const Mat se = batch_sem(lags.back().batch);
      bool negligible = true;
      for (int p = 0; p < e && negligible; ++p)
        for (int q = 0; q < e; ++q)
          if (std::fabs(lags.back().C(p, q)) >= 2.0 * se(p, q)) {
            negligible = false;
            break;
          }
      if (negligible) {
        if (streak == 0) streak_start = r;
        if (++streak == 5) break;
      } else {
        streak = 0;
      }
      if (r >= opts.lag_cap && streak == 0) break;
    }
    if (streak == 5) {
      L = streak_start - 1;
    } else {
      L = opts.lag_cap;
      cap_hit = true;
    }
    L = std::min<long>(L, opts.lag_cap);
  }
  if (N < 100L * std::max<long>(L, 1))
    throw InsufficientData("green_kubo: orbit_len must be >= 100 * lag_L");

  GkCore core;
  core.lag_L = L;
  core.cap_hit = cap_hit;
  core.sigma_raw = lags[0].C;
  core.E = Mat(e, e);
  core.sigma_batch = lags[0].batch;
  core.E_batch.assign(opts.n_batches, Mat(e, e));
  for (long r = 1; r <= L; ++r) {
    const double w = opts.bartlett ? 1.0 - static_cast<double>(r) / static_cast<double>(L + 1) : 1.0;
    const Mat& Cr = lags[r].C;
    core.sigma_raw += w * (Cr + transpose(Cr));
    core.E += w * Cr;
    for (int b = 0; b < opts.n_batches; ++b) {
      const Mat& Crb = lags[r].batch[b];
      core.sigma_batch[b] += w * (Crb + transpose(Crb));
      core.E_batch[b] += w * Crb;
    }
  }
  return core;
}

std::vector<double> collect_map_orbit(const DriverSystem& sys, const Observable& obs, long N,
                                      std::uint64_t seed, long burn_in) {
  std::vector<double> v(static_cast<size_t>(N) * obs.dim);
  DriverState s = sample_initial(sys, seed, burn_in);
  for (long i = 0; i < N; ++i) {
    obs.eval(s, &v[static_cast<size_t>(i) * obs.dim]);
    s = step(sys, s);
  }
  return v;
}

}  // namespace

std::string method_name(EstimatorMethod m) {
  switch (m) {
    case EstimatorMethod::GreenKuboDiscrete: return "green-kubo-discrete";
    case EstimatorMethod::GreenKuboFlow: return "green-kubo-flow";
    case EstimatorMethod::Induced: return "induced";
    case EstimatorMethod::Ensemble: return "ensemble";
  }
  return "?";
}

Mat drift_matrices(const Mat& sigma, const Mat& E) {
  if (sigma.rows() != E.rows() || sigma.cols() != E.cols())
    throw DimensionMismatch("drift_matrices: sigma and E shapes differ");
  return 2.0 * E - sigma;
}

DiffusionStats green_kubo_discrete(const DriverSystem& sys, const Observable& obs, int lag_L,
                                   long orbit_len, std::uint64_t seed, const GkOptions& opts) {
  if (sys.is_flow)
    throw WrongKind("green_kubo_discrete: driver is a flow; use green_kubo_flow or induced_stats");
  refuse_if_not_estimable(sys, "green_kubo_discrete");
  if (lag_L > 0 && orbit_len < 100L * lag_L)
    throw InsufficientData("green_kubo_discrete: orbit_len must be >= 100 * lag_L");

  std::vector<double> samples = collect_map_orbit(sys, obs, orbit_len, seed, opts.burn_in);
  GkCore core = gk_assemble(samples, orbit_len, obs.dim, lag_L, opts);

  DiffusionStats st;
  st.dim = obs.dim;
  st.method = EstimatorMethod::GreenKuboDiscrete;
  st.seed = seed;
  st.n_samples = orbit_len;
  st.lag_L = core.lag_L;
  st.lag_cap_hit = core.cap_hit;
  st.bartlett = opts.bartlett;
  st.sigma = psd_clip(core.sigma_raw, &st.psd_clip_magnitude);
  st.E = core.E;
  st.D = drift_matrices(st.sigma, st.E);
  st.stderr_sigma = batch_sem(core.sigma_batch);
  st.stderr_E = batch_sem(core.E_batch);
  return st;
}

DiffusionStats green_kubo_flow(const DriverSystem& sys, const Observable& obs, double t_max,
                               double quad_dt, double orbit_time, std::uint64_t seed,
                               const GkFlowOptions& opts) {
  if (!sys.is_flow) throw WrongKind("green_kubo_flow: driver is a map; use green_kubo_discrete");
  refuse_if_not_estimable(sys, "green_kubo_flow");
  if (!(t_max > 0.0)) throw InvalidParameter("green_kubo_flow: t_max must be > 0");
  if (!(quad_dt > 0.0)) throw InvalidParameter("green_kubo_flow: quad_dt must be > 0");

  double corr_dt = opts.corr_dt > 0.0 ? opts.corr_dt : std::max(quad_dt, t_max / 400.0);
  if (corr_dt < quad_dt) corr_dt = quad_dt;
  const long n_lags = static_cast<long>(std::floor(t_max / corr_dt + 1e-9));
  const long M = static_cast<long>(std::floor(orbit_time / corr_dt + 1e-9));
  if (M < opts.n_batches * (n_lags + 1) || M < 100 * n_lags)
    throw InsufficientData("green_kubo_flow: orbit_time too short for t_max (need >> n_batches * t_max)");

  std::vector<double> v(static_cast<size_t>(M) * obs.dim);
  {
    DriverState s = sample_initial(sys, seed, opts.burn_in);
    for (long i = 0; i < M; ++i) {
      obs.eval(s, &v[static_cast<size_t>(i) * obs.dim]);
      s = flow_step(sys, s, corr_dt);
    }
  }
  const int e = obs.dim;
  subtract_mean(v, M, e);

  std::vector<LagResult> lagC;
  lagC.reserve(n_lags + 1);
  double peak = 0.0;
  for (long k = 0; k <= n_lags; ++k) {
    lagC.push_back(lagged_cov(v, M, e, k, opts.n_batches));
    peak = std::max(peak, max_abs(lagC.back().C));
  }
  const double tail = max_abs(lagC.back().C);

  // Trapezoid in the lag variable.
  const int B = opts.n_batches;
  Mat sigma_raw(e, e), D_raw(e, e);
  std::vector<Mat> sigma_batch(B, Mat(e, e)), D_batch(B, Mat(e, e));
  for (long k = 0; k <= n_lags; ++k) {
    const double w = (k == 0 || k == n_lags) ? 0.5 * corr_dt : corr_dt;
    const Mat& C = lagC[k].C;
    sigma_raw += w * (C + transpose(C));
    D_raw += w * (C - transpose(C));
    for (int b = 0; b < B; ++b) {
      const Mat& Cb = lagC[k].batch[b];
      sigma_batch[b] += w * (Cb + transpose(Cb));
      D_batch[b] += w * (Cb - transpose(Cb));
    }
  }

  std::vector<Mat> E_batch(B);
  for (int b = 0; b < B; ++b) E_batch[b] = 0.5 * (sigma_batch[b] + D_batch[b]);

  DiffusionStats st;
  st.dim = e;
  st.method = EstimatorMethod::GreenKuboFlow;
  st.seed = seed;
  st.n_samples = M;
  st.lag_L = n_lags;
  st.sigma = psd_clip(sigma_raw, &st.psd_clip_magnitude);
  st.E = 0.5 * (sigma_raw + D_raw);
  st.D = drift_matrices(st.sigma, st.E);
  st.stderr_sigma = batch_sem(sigma_batch);
  st.stderr_E = batch_sem(E_batch);
  st.tail_ratio = peak > 0.0 ? tail / peak : 0.0;
  st.tail_warning = st.tail_ratio > opts.tail_threshold;
  return st;
}

DiffusionStats induced_stats(const DriverSystem& sys, const Observable& obs, long orbit_len,
                             std::uint64_t seed, const InducedOptions& opts) {
  if (sys.kind != SystemKind::Suspension)
    throw WrongKind("induced_stats: driver must be a suspension flow");
  refuse_if_not_estimable(sys, "induced_stats");

  const int e = obs.dim;
  const int B = opts.gk.n_batches;
  const long batch_len = orbit_len / B;
  if (batch_len < 200) throw InsufficientData("induced_stats: orbit too short for batch means");

  std::vector<double> vt(static_cast<size_t>(orbit_len) * e);  // induced observable samples
  std::vector<double> rbar_batch(B, 0.0), counts(B, 0.0);
  std::vector<Mat> g_batch(B, Mat(e, e));
  double r_sum = 0.0;
  Mat g_sum(e, e);

  DriverState s = sample_initial(*sys.base, derive_seed(seed, 0x1D), opts.gk.burn_in);
  std::vector<double> vu, vprev(e), H(e), vtilde(e);
  vu.resize(e);
  for (long j = 0; j < orbit_len; ++j) {
    const double r = sys.roof(s.x[0]);
    if (!std::isfinite(r) || r <= 0.0)
      throw NonFiniteState("induced_stats: roof evaluated non-finite or non-positive");
    const int P = std::max(2, static_cast<int>(std::ceil(opts.fiber_panels * r)));
    const double du = r / P;

    // Trapezoid sweep along the fiber, accumulating vtilde = int v du,
    // the partial integral H(u) = int_0^u v, and g = int H^b v^g du.
    DriverState fib = s;
    fib.height = 0.0;
    obs.eval(fib, vprev.data());
    std::fill(H.begin(), H.end(), 0.0);
    for (int k = 0; k < e; ++k) vtilde[k] = 0.5 * du * vprev[k];
    Mat g(e, e);
    for (int p = 0; p < e; ++p)
      for (int q = 0; q < e; ++q) g(p, q) += 0.5 * du * H[p] * vprev[q];
    for (int i = 1; i <= P; ++i) {
      fib.height = std::min(i * du, std::nextafter(r, 0.0));
      obs.eval(fib, vu.data());
      for (int k = 0; k < e; ++k) H[k] += 0.5 * du * (vprev[k] + vu[k]);
      const double w = (i == P) ? 0.5 * du : du;
      for (int k = 0; k < e; ++k) vtilde[k] += w * vu[k];
      for (int p = 0; p < e; ++p)
        for (int q = 0; q < e; ++q) g(p, q) += w * H[p] * vu[q];
      std::swap(vprev, vu);
    }

    for (int k = 0; k < e; ++k) vt[static_cast<size_t>(j) * e + k] = vtilde[k];
    const int b = static_cast<int>(std::min<long>(j / batch_len, B - 1));
    rbar_batch[b] += r;
    counts[b] += 1.0;
    r_sum += r;
    g_batch[b] += g;
    g_sum += g;

    s = step(*sys.base, s);
  }

  const double rbar = r_sum / static_cast<double>(orbit_len);
  Mat H_term = g_sum;
  H_term *= 1.0 / (static_cast<double>(orbit_len) * rbar);

  GkCore core = gk_assemble(vt, orbit_len, e, 0, opts.gk);  // adaptive truncation on vtilde

  DiffusionStats st;
  st.dim = e;
  st.method = EstimatorMethod::Induced;
  st.seed = seed;
  st.n_samples = orbit_len;
  st.lag_L = core.lag_L;
  st.lag_cap_hit = core.cap_hit;
  st.bartlett = opts.gk.bartlett;

  Mat sigma_raw = (1.0 / rbar) * core.sigma_raw;
  st.sigma = psd_clip(sigma_raw, &st.psd_clip_magnitude);
  st.E = (1.0 / rbar) * core.E + H_term;
  st.D = drift_matrices(st.sigma, st.E);

  std::vector<Mat> sigma_batch(B), E_batch(B);
  for (int b = 0; b < B; ++b) {
    const double rb = rbar_batch[b] / counts[b];
    Mat Hb = g_batch[b];
    Hb *= 1.0 / (counts[b] * rb);
    sigma_batch[b] = (1.0 / rb) * core.sigma_batch[b];
    E_batch[b] = (1.0 / rb) * core.E_batch[b] + Hb;
  }
  st.stderr_sigma = batch_sem(sigma_batch);
  st.stderr_E = batch_sem(E_batch);

  InducedData ind;
  ind.rbar = rbar;
  ind.tilde_E = core.E;
  ind.H_term = H_term;
  st.induced = ind;
  return st;
}

std::pair<Mat, Mat> ensemble_E(const std::vector<PathPair>& paths) {
  if (paths.size() < 100)
    throw InsufficientData("ensemble_E: need at least 100 paths");
  const PathPair& first = paths.front();
  if (first.T < 1.0) throw InvalidParameter("ensemble_E: paths must reach T >= 1");
  for (const PathPair& p : paths) {
    if (p.dim != first.dim || p.n != first.n || p.T != first.T ||
        p.meta.driver != first.meta.driver || p.meta.observable != first.meta.observable)
      throw InvalidParameter("ensemble_E: heterogeneous ensemble (n, T, driver and observable must match)");
  }
  const int e = first.dim;
  Mat mean(e, e), sem(e, e);
  std::vector<RunningMeanVar> acc(static_cast<size_t>(e) * e);
  for (const PathPair& p : paths) {
    const Mat ww = p.WW_at(p.index_of(1.0));
    for (int i = 0; i < e; ++i)
      for (int j = 0; j < e; ++j) acc[static_cast<size_t>(i) * e + j].add(ww(i, j));
  }
  for (int i = 0; i < e; ++i)
    for (int j = 0; j < e; ++j) {
      mean(i, j) = acc[static_cast<size_t>(i) * e + j].mean();
      sem(i, j) = acc[static_cast<size_t>(i) * e + j].sem();
    }
  return {mean, sem};
}

EnsembleEResult ensemble_E_streaming(const DriverSystem& sys, const Observable& obs, long n,
                                     long n_paths, std::uint64_t seed, int threads) {
  if (n_paths < 100) throw InsufficientData("ensemble_E_streaming: need at least 100 paths");
  const int e = obs.dim;
  std::vector<double> endpoints(static_cast<size_t>(n_paths) * e * e);
  parallel_for(n_paths, threads, [&](long i) {
    PairEndpoint ep = iterated_endpoint(sys, obs, n, 1.0, derive_seed(seed, static_cast<std::uint64_t>(i)));
    for (int p = 0; p < e; ++p)
      for (int q = 0; q < e; ++q)
        endpoints[(static_cast<size_t>(i) * e + p) * e + q] = ep.WW(p, q);
  });
  EnsembleEResult out;
  out.n_paths = n_paths;
  out.mean = Mat(e, e);
  out.sem = Mat(e, e);
  std::vector<RunningMeanVar> acc(static_cast<size_t>(e) * e);
  for (long i = 0; i < n_paths; ++i)
    for (int p = 0; p < e; ++p)
      for (int q = 0; q < e; ++q)
        acc[static_cast<size_t>(p) * e + q].add(endpoints[(static_cast<size_t>(i) * e + p) * e + q]);
  for (int p = 0; p < e; ++p)
    for (int q = 0; q < e; ++q) {
      out.mean(p, q) = acc[static_cast<size_t>(p) * e + q].mean();
      out.sem(p, q) = acc[static_cast<size_t>(p) * e + q].sem();
    }
  return out;
}

namespace {

nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Mat mat_from_json(const nlohmann::json& j) {
  const int r = static_cast<int>(j.size());
  const int c = r > 0 ? static_cast<int>(j[0].size()) : 0;
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
  return m;
}

}  // namespace

std::string DiffusionStats::to_json(int indent) const {
  nlohmann::json j;
  j["method"] = method_name(method);
  j["dim"] = dim;
  j["sigma"] = mat_to_json(sigma);
  j["E"] = mat_to_json(E);
  j["D"] = mat_to_json(D);
  j["levy_area"] = mat_to_json(levy_area());
  j["sym_residual"] = mat_to_json(sym_residual());
  j["stderr_sigma"] = mat_to_json(stderr_sigma);
  j["stderr_E"] = mat_to_json(stderr_E);
  j["lag_L"] = lag_L;
  j["lag_cap_hit"] = lag_cap_hit;
  j["n_samples"] = n_samples;
  j["seed"] = seed;
  j["psd_clip_magnitude"] = psd_clip_magnitude;
  j["bartlett"] = bartlett;
  j["tail_warning"] = tail_warning;
  j["tail_ratio"] = tail_ratio;
  if (induced) {
    j["induced"] = {{"rbar", induced->rbar},
                    {"tilde_E", mat_to_json(induced->tilde_E)},
                    {"H_term", mat_to_json(induced->H_term)}};
  }
  return j.dump(indent);
}

DiffusionStats stats_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  DiffusionStats st;
  st.dim = j.at("dim").get<int>();
  const std::string m = j.at("method").get<std::string>();
  if (m == "green-kubo-discrete") st.method = EstimatorMethod::GreenKuboDiscrete;
  else if (m == "green-kubo-flow") st.method = EstimatorMethod::GreenKuboFlow;
  else if (m == "induced") st.method = EstimatorMethod::Induced;
  else st.method = EstimatorMethod::Ensemble;
  st.sigma = mat_from_json(j.at("sigma"));
  st.E = mat_from_json(j.at("E"));
  st.D = mat_from_json(j.at("D"));
  st.stderr_sigma = mat_from_json(j.at("stderr_sigma"));
  st.stderr_E = mat_from_json(j.at("stderr_E"));
  st.lag_L = j.at("lag_L").get<long>();
  st.n_samples = j.at("n_samples").get<long>();
  st.seed = j.at("seed").get<std::uint64_t>();
  st.psd_clip_magnitude = j.at("psd_clip_magnitude").get<double>();
  st.bartlett = j.at("bartlett").get<bool>();
  st.tail_warning = j.value("tail_warning", false);
  st.tail_ratio = j.value("tail_ratio", 0.0);
  st.lag_cap_hit = j.value("lag_cap_hit", false);
  if (j.contains("induced")) {
    InducedData ind;
    ind.rbar = j["induced"].at("rbar").get<double>();
    ind.tilde_E = mat_from_json(j["induced"].at("tilde_E"));
    ind.H_term = mat_from_json(j["induced"].at("H_term"));
    st.induced = ind;
  }
  return st;
}

}  // namespace homog
