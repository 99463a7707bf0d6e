#include "homog/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "homog/errors.hpp"
#include "homog/pathgen.hpp"
#include "homog/rng.hpp"
#include "homog/stats.hpp"
#include "homog/threading.hpp"

namespace homog {

namespace {

// Asymptotic two-sample critical value sqrt(-ln(alpha/2)/2) * sqrt((na+nb)/(na nb)).
double ks_critical(double alpha, std::size_t na, std::size_t nb) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(static_cast<double>(na + nb) / (static_cast<double>(na) * static_cast<double>(nb)));
}

}  // namespace

KsStat ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InsufficientData("ks_two_sample: empty ensemble");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t na = a.size(), nb = b.size();
  std::size_t i = 0, j = 0;
  double stat = 0.0;
  // Right-continuous step CDFs evaluated at the pooled sorted points: at each
  // pooled value advance both counters past all ties before comparing.
  while (i < na && j < nb) {
    const double x = std::min(a[i], b[j]);
    while (i < na && a[i] <= x) ++i;
    while (j < nb && b[j] <= x) ++j;
    const double d = std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb);
    stat = std::max(stat, d);
  }
  KsStat out;
  out.stat = stat;
  out.n_a = na;
  out.n_b = nb;
  out.crit5 = ks_critical(0.05, na, nb);
  out.crit1 = ks_critical(0.01, na, nb);
  return out;
}

std::vector<KsStat> ks_distance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  if (a.empty() || b.empty()) throw InsufficientData("ks_distance: empty ensemble");
  const std::size_t d = a.front().size();
  if (b.front().size() != d) throw DimensionMismatch("ks_distance: ensembles of different dimension");
  std::vector<KsStat> out;
  out.reserve(d);
  for (std::size_t c = 0; c < d; ++c) {
    std::vector<double> xa(a.size()), xb(b.size());
    for (std::size_t k = 0; k < a.size(); ++k) xa[k] = a[k][c];
    for (std::size_t k = 0; k < b.size(); ++k) xb[k] = b[k][c];
    out.push_back(ks_two_sample(std::move(xa), std::move(xb)));
  }
  return out;
}

namespace {

void check_moment_inputs(int p, const std::vector<double>& t_grid, long n_paths) {
  if (p < 1) throw InvalidParameter("moment_slope: p must be >= 1");
  if (n_paths < 1000) throw InsufficientData("moment_slope: need at least 1e3 paths");
  if (t_grid.size() < 2) throw InvalidParameter("moment_slope: t_grid needs >= 2 points");
  const auto [mn, mx] = std::minmax_element(t_grid.begin(), t_grid.end());
  if (!(*mn > 0.0) || *mx / *mn < 10.0 * (1.0 - 1e-12))
    throw InvalidParameter("moment_slope: t_grid must span at least one decade");
}

MomentSlopeResult slopes_from_accumulators(const std::vector<double>& t_grid, int p, long n_paths,
                                           const std::vector<double>& accW,
                                           const std::vector<double>& accWW) {
  MomentSlopeResult res;
  res.p = p;
  res.t = t_grid;
  const double qW = 2.0 * p;
  const double qWW = 2.0 * p / 3.0;
  bool all_zero = true;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double mw = accW[i] / static_cast<double>(n_paths);
    const double mww = accWW[i] / static_cast<double>(n_paths);
    if (mw > 0.0 || mww > 0.0) all_zero = false;
    res.norm_W.push_back(std::pow(mw, 1.0 / qW));
    res.norm_WW.push_back(std::pow(mww, 1.0 / qWW));
  }
  if (all_zero) {
    res.defined = false;
    res.slope_W = res.slope_WW = std::numeric_limits<double>::quiet_NaN();
    return res;
  }
  std::vector<double> lt, lw, lww;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    lt.push_back(std::log(t_grid[i]));
    lw.push_back(std::log(res.norm_W[i]));
    lww.push_back(std::log(res.norm_WW[i]));
  }
  res.defined = true;
  res.slope_W = ls_slope(lt, lw);
  res.slope_WW = ls_slope(lt, lww);
  return res;
}

}  // namespace

MomentSlopeResult moment_slope(const DriverSystem& sys, const Observable& obs, int p, long n,
                               const std::vector<double>& t_grid, long n_paths, std::uint64_t seed,
                               int threads) {
  if (sys.is_flow) throw WrongKind("moment_slope: driver must be a map");
  check_moment_inputs(p, t_grid, n_paths);

  const int e = obs.dim;
  const std::size_t nt = t_grid.size();
  std::vector<long> target(nt);
  for (std::size_t i = 0; i < nt; ++i)
    target[i] = static_cast<long>(std::floor(static_cast<double>(n) * t_grid[i] + 1e-9));
  const long max_step = *std::max_element(target.begin(), target.end());

  // per-path values, reduced in index order afterwards
  std::vector<double> pw(static_cast<size_t>(n_paths) * nt), pww(static_cast<size_t>(n_paths) * nt);
  const double qW = 2.0 * p, qWW = 2.0 * p / 3.0;

  parallel_for(n_paths, threads, [&](long pi) {
    DriverState s = sample_initial(sys, derive_seed(seed, static_cast<std::uint64_t>(pi)));
    std::vector<double> v(e), V(e, 0.0), S(static_cast<size_t>(e) * e, 0.0);
    const double ws = 1.0 / std::sqrt(static_cast<double>(n));
    const double wws = 1.0 / static_cast<double>(n);
    for (long j = 0; j <= max_step; ++j) {
      for (std::size_t i = 0; i < nt; ++i) {
        if (target[i] == j) {
          double w2 = 0.0;
          for (int b = 0; b < e; ++b) w2 += (ws * V[b]) * (ws * V[b]);
          double ww2 = 0.0;
          for (int k = 0; k < e * e; ++k) ww2 += (wws * S[k]) * (wws * S[k]);
          pw[static_cast<size_t>(pi) * nt + i] = std::pow(w2, 0.5 * qW);
          pww[static_cast<size_t>(pi) * nt + i] = std::pow(ww2, 0.5 * qWW);
        }
      }
      if (j == max_step) break;
      obs.eval(s, v.data());
      for (int b = 0; b < e; ++b) {
        const double Vb = V[b];
        for (int g = 0; g < e; ++g) S[static_cast<size_t>(b) * e + g] += Vb * v[g];
      }
      for (int b = 0; b < e; ++b) V[b] += v[b];
      s = step(sys, s);
    }
  });

  std::vector<double> accW(nt, 0.0), accWW(nt, 0.0);
  for (long pi = 0; pi < n_paths; ++pi)
    for (std::size_t i = 0; i < nt; ++i) {
      accW[i] += pw[static_cast<size_t>(pi) * nt + i];
      accWW[i] += pww[static_cast<size_t>(pi) * nt + i];
    }
  return slopes_from_accumulators(t_grid, p, n_paths, accW, accWW);
}

MomentSlopeResult moment_slope_brownian(const Mat& sigma, long n, const std::vector<double>& t_grid,
                                        long n_paths, std::uint64_t seed, int p, int threads) {
  check_moment_inputs(p, t_grid, n_paths);
  const std::size_t nt = t_grid.size();
  const double T = *std::max_element(t_grid.begin(), t_grid.end());
  const double qW = 2.0 * p, qWW = 2.0 * p / 3.0;

  std::vector<double> pw(static_cast<size_t>(n_paths) * nt), pww(static_cast<size_t>(n_paths) * nt);
  parallel_for(n_paths, threads, [&](long pi) {
    PathPair path = brownian_pair(sigma, n, T, derive_seed(seed, static_cast<std::uint64_t>(pi)));
    const int e = path.dim;
    for (std::size_t i = 0; i < nt; ++i) {
      const long k = static_cast<long>(std::floor(static_cast<double>(n) * t_grid[i] + 1e-9));
      double w2 = 0.0, ww2 = 0.0;
      for (int b = 0; b < e; ++b) {
        const double x = path.W[static_cast<size_t>(k) * e + b];
        w2 += x * x;
      }
      for (int b = 0; b < e * e; ++b) {
        const double x = path.WW[static_cast<size_t>(k) * e * e + b];
        ww2 += x * x;
      }
      pw[static_cast<size_t>(pi) * nt + i] = std::pow(w2, 0.5 * qW);
      pww[static_cast<size_t>(pi) * nt + i] = std::pow(ww2, 0.5 * qWW);
    }
  });

  std::vector<double> accW(nt, 0.0), accWW(nt, 0.0);
  for (long pi = 0; pi < n_paths; ++pi)
    for (std::size_t i = 0; i < nt; ++i) {
      accW[i] += pw[static_cast<size_t>(pi) * nt + i];
      accWW[i] += pww[static_cast<size_t>(pi) * nt + i];
    }
  return slopes_from_accumulators(t_grid, p, n_paths, accW, accWW);
}

CohomologyTriple make_cohomology_triple(const DriverSystem& sys, const Observable& v_hat,
                                        const Observable& chi) {
  if (sys.is_flow) throw WrongKind("make_cohomology_triple: map drivers only");
  if (v_hat.dim != chi.dim) throw DimensionMismatch("make_cohomology_triple: v_hat and chi dims differ");
  CohomologyTriple t;
  t.v_hat = v_hat;
  t.chi = chi;
  t.v.dim = v_hat.dim;
  t.v.name = v_hat.name + "+cob(" + chi.name + ")";
  t.v.offset.assign(v_hat.dim, 0.0);
  t.v.eval_raw = [sys, v_hat, chi](const DriverState& s, double* out) {
    const int e = v_hat.dim;
    std::vector<double> tmp(e);
    v_hat.eval(s, out);
    chi.eval(step(sys, s), tmp.data());
    for (int i = 0; i < e; ++i) out[i] += tmp[i];
    chi.eval(s, tmp.data());
    for (int i = 0; i < e; ++i) out[i] -= tmp[i];
  };
  return t;
}

CohomologyShift cohomology_shift(const DriverSystem& sys, const CohomologyTriple& triple, long n,
                                 double T, std::uint64_t seed, PredictionMethod method,
                                 long predict_orbit_len) {
  if (sys.is_flow) throw WrongKind("cohomology_shift: map drivers only");
  const int e = triple.v.dim;
  const long steps = static_cast<long>(std::floor(static_cast<double>(n) * T + 1e-9));

  // Observed: both iterated integrals accumulated over the same orbit.
  Mat observed(e, e);
  {
    DriverState s = sample_initial(sys, seed);
    std::vector<double> v(e), vh(e), V(e, 0.0), Vh(e, 0.0);
    Mat S(e, e), Sh(e, e);
    for (long j = 0; j < steps; ++j) {
      triple.v.eval(s, v.data());
      triple.v_hat.eval(s, vh.data());
      for (int b = 0; b < e; ++b)
        for (int g = 0; g < e; ++g) {
          S(b, g) += V[b] * v[g];
          Sh(b, g) += Vh[b] * vh[g];
        }
      for (int b = 0; b < e; ++b) {
        V[b] += v[b];
        Vh[b] += vh[b];
      }
      s = step(sys, s);
    }
    const double wws = 1.0 / static_cast<double>(n);
    observed = (1.0 / T) * (wws * S - wws * Sh);
  }

  // Predicted: int chi^b v^g dmu - int vhat^b chi^g o f dmu.
  Mat predicted(e, e);
  Mat scale(e, e);
  {
    // CLT scale estimate from an orbit regardless of the prediction method.
    const long N = std::min<long>(predict_orbit_len, 1000000);
    DriverState s = sample_initial(sys, derive_seed(seed, 0xC0FFEE));
    std::vector<double> v(e), vh(e), chi0(e), chi1(e);
    std::vector<RunningMeanVar> acc(static_cast<size_t>(e) * e);
    for (long j = 0; j < N; ++j) {
      DriverState nxt = step(sys, s);
      triple.v.eval(s, v.data());
      triple.v_hat.eval(s, vh.data());
      triple.chi.eval(s, chi0.data());
      triple.chi.eval(nxt, chi1.data());
      for (int b = 0; b < e; ++b)
        for (int g = 0; g < e; ++g)
          acc[static_cast<size_t>(b) * e + g].add(chi0[b] * v[g] - vh[b] * chi1[g]);
      s = nxt;
    }
    for (int b = 0; b < e; ++b)
      for (int g = 0; g < e; ++g) {
        const auto& a = acc[static_cast<size_t>(b) * e + g];
        scale(b, g) = std::sqrt(a.var_sample());
        if (method == PredictionMethod::OrbitAverage) predicted(b, g) = a.mean();
      }
  }

  if (method == PredictionMethod::OrbitAverage && predict_orbit_len > 1000000) {
    // refine the mean on the full requested orbit length
    DriverState s = sample_initial(sys, derive_seed(seed, 0xC0FFEE));
    std::vector<double> v(e), vh(e), chi0(e), chi1(e);
    Mat sum(e, e);
    for (long j = 0; j < predict_orbit_len; ++j) {
      DriverState nxt = step(sys, s);
      triple.v.eval(s, v.data());
      triple.v_hat.eval(s, vh.data());
      triple.chi.eval(s, chi0.data());
      triple.chi.eval(nxt, chi1.data());
      for (int b = 0; b < e; ++b)
        for (int g = 0; g < e; ++g) sum(b, g) += chi0[b] * v[g] - vh[b] * chi1[g];
      s = nxt;
    }
    predicted = (1.0 / static_cast<double>(predict_orbit_len)) * sum;
  }

  if (method == PredictionMethod::Quadrature) {
    if (!(sys.kind == SystemKind::Doubling ||
          (sys.kind == SystemKind::PomeauManneville && sys.pm_alpha == 0.0)))
      throw InvalidParameter(
          "cohomology_shift: quadrature prediction needs a Lebesgue-invariant interval map");
    auto eval_at = [&](const Observable& o, double x, int comp) {
      DriverState s;
      s.dim = 1;
      s.x[0] = x;
      std::vector<double> buf(o.dim);
      o.eval(s, buf.data());
      return buf[comp];
    };
    auto fx = [](double x) {
      double y = 2.0 * x;
      return y >= 1.0 ? y - 1.0 : y;
    };
    const int panels = 4096;
    for (int b = 0; b < e; ++b)
      for (int g = 0; g < e; ++g) {
        const double term1 = simpson(
            [&](double x) { return eval_at(triple.chi, x, b) * eval_at(triple.v, x, g); }, 0.0,
            1.0 - 1e-12, panels);
        // split at the branch point of f
        auto f2 = [&](double x) { return eval_at(triple.v_hat, x, b) * eval_at(triple.chi, fx(x), g); };
        const double term2 =
            simpson(f2, 0.0, 0.5 - 1e-12, panels / 2) + simpson(f2, 0.5, 1.0 - 1e-12, panels / 2);
        predicted(b, g) = term1 - term2;
      }
  }

  CohomologyShift out;
  out.observed = observed;
  out.predicted = predicted;
  out.tolerance_scale = scale;
  out.n = n;
  out.T = T;
  return out;
}

EnsembleMoments ensemble_moments(const std::vector<Vec>& xs) {
  if (xs.empty()) throw InsufficientData("ensemble_moments: empty ensemble");
  const int d = static_cast<int>(xs.front().size());
  EnsembleMoments m;
  m.mean.assign(d, 0.0);
  m.mean_se.assign(d, 0.0);
  m.cov = Mat(d, d);
  std::vector<RunningMeanVar> acc(d);
  for (const Vec& x : xs)
    for (int i = 0; i < d; ++i) acc[i].add(x[i]);
  for (int i = 0; i < d; ++i) {
    m.mean[i] = acc[i].mean();
    m.mean_se[i] = acc[i].sem();
  }
  for (const Vec& x : xs)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m.cov(i, j) += (x[i] - m.mean[i]) * (x[j] - m.mean[j]);
  if (xs.size() > 1) m.cov *= 1.0 / static_cast<double>(xs.size() - 1);
  return m;
}

namespace {

double max_stat(const std::vector<KsStat>& ks) {
  double r = 0.0;
  for (const KsStat& k : ks) r = std::max(r, k.stat);
  return r;
}

}  // namespace

ComparisonReport convergence_report(const std::vector<LabeledEnsemble>& fast_ensembles,
                                    const LabeledEnsemble& sde_corrected,
                                    const LabeledEnsemble& sde_naive, const Mat& levy_D,
                                    const Mat& levy_D_se, const ToleranceSet& tol) {
  if (fast_ensembles.size() < 2)
    throw InvalidParameter("convergence_report: need fast ensembles for at least two n values");
  const double T = sde_corrected.T;
  if (std::fabs(sde_naive.T - T) > 1e-12)
    throw InvalidParameter("convergence_report: horizon mismatch between SDE ensembles");
  for (const auto& f : fast_ensembles)
    if (std::fabs(f.T - T) > 1e-12)
      throw InvalidParameter("convergence_report: horizon mismatch between fast and SDE ensembles");

  ComparisonReport rep;
  rep.T = T;
  rep.d = static_cast<int>(sde_corrected.X.front().size());
  rep.corrected = ensemble_moments(sde_corrected.X);
  rep.naive = ensemble_moments(sde_naive.X);

  std::vector<LabeledEnsemble> fast = fast_ensembles;
  std::sort(fast.begin(), fast.end(),
            [](const LabeledEnsemble& a, const LabeledEnsemble& b) { return a.n < b.n; });
  for (const auto& f : fast) {
    ComparisonEntry e;
    e.n = f.n;
    e.vs_corrected = ks_distance(f.X, sde_corrected.X);
    e.vs_naive = ks_distance(f.X, sde_naive.X);
    e.moments = ensemble_moments(f.X);
    rep.fast.push_back(std::move(e));
  }

  // Is the correction statistically visible at all?
  double dmax = 0.0, dse = 0.0;
  for (int i = 0; i < levy_D.rows(); ++i)
    for (int j = 0; j < levy_D.cols(); ++j) {
      dmax = std::max(dmax, std::fabs(levy_D(i, j)));
      dse = std::max(dse, std::fabs(levy_D_se(i, j)));
    }
  rep.correction_indistinguishable = dmax <= tol.se_antisym * dse;

  {
    Verdict v;
    v.name = "ks-decreasing-in-n";
    v.tolerance = "ks-1pct";
    bool dec = true;
    std::ostringstream os;
    for (std::size_t i = 0; i < rep.fast.size(); ++i) {
      const double s = max_stat(rep.fast[i].vs_corrected);
      os << (i ? ", " : "") << "n=" << rep.fast[i].n << ": " << s;
      if (i > 0 && s >= max_stat(rep.fast[i - 1].vs_corrected)) dec = false;
    }
    v.pass = dec;
    v.detail = os.str();
    rep.verdicts.push_back(v);
  }
  {
    Verdict v;
    v.name = "corrected-beats-naive";
    v.tolerance = "5se";
    const ComparisonEntry& last = rep.fast.back();
    if (rep.correction_indistinguishable) {
      v.pass = true;
      v.detail = "correction indistinguishable from zero at 5 SE; comparison not applicable";
    } else {
      const double kc = max_stat(last.vs_corrected);
      const double kn = max_stat(last.vs_naive);
      v.pass = kc < kn;
      std::ostringstream os;
      os << "largest n=" << last.n << ": KS vs corrected " << kc << ", vs naive " << kn;
      v.detail = os.str();
    }
    rep.verdicts.push_back(v);
  }
  rep.pass = true;
  for (const Verdict& v : rep.verdicts) rep.pass = rep.pass && v.pass;
  return rep;
}

std::vector<std::pair<double, double>> ecdf_curve(const std::vector<Vec>& xs, int coord) {
  std::vector<double> v(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) v[i] = xs[i][coord];
  std::sort(v.begin(), v.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.emplace_back(v[i], static_cast<double>(i + 1) / static_cast<double>(v.size()));
  return out;
}

namespace {

nlohmann::json ks_to_json(const std::vector<KsStat>& ks) {
  nlohmann::json arr = nlohmann::json::array();
  for (const KsStat& k : ks)
    arr.push_back({{"stat", k.stat}, {"crit5", k.crit5}, {"crit1", k.crit1},
                   {"n_a", k.n_a}, {"n_b", k.n_b}});
  return arr;
}

nlohmann::json moments_to_json(const EnsembleMoments& m) {
  nlohmann::json cov = nlohmann::json::array();
  for (int i = 0; i < m.cov.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cov.cols(); ++j) row.push_back(m.cov(i, j));
    cov.push_back(row);
  }
  return {{"mean", m.mean}, {"mean_se", m.mean_se}, {"cov", cov}};
}

}  // namespace

std::string ComparisonReport::to_json(int indent) const {
  nlohmann::json j;
  j["T"] = T;
  j["d"] = d;
  j["correction_indistinguishable"] = correction_indistinguishable;
  j["pass"] = pass;
  j["provenance"] = {{"fast", provenance_fast},
                     {"corrected", provenance_corrected},
                     {"naive", provenance_naive}};
  nlohmann::json fastj = nlohmann::json::array();
  for (const auto& f : fast)
    fastj.push_back({{"n", f.n},
                     {"ks_vs_corrected", ks_to_json(f.vs_corrected)},
                     {"ks_vs_naive", ks_to_json(f.vs_naive)},
                     {"moments", moments_to_json(f.moments)}});
  j["fast"] = fastj;
  j["corrected_moments"] = moments_to_json(corrected);
  j["naive_moments"] = moments_to_json(naive);
  nlohmann::json vj = nlohmann::json::array();
  for (const Verdict& v : verdicts)
    vj.push_back({{"name", v.name}, {"pass", v.pass}, {"tolerance", v.tolerance}, {"detail", v.detail}});
  j["verdicts"] = vj;
  return j.dump(indent);
}

std::string ComparisonReport::to_text() const {
  std::ostringstream os;
  os << "convergence report (T = " << T << ", d = " << d << ")\n";
  os << "  n         maxKS(corrected)  maxKS(naive)\n";
  for (const auto& f : fast) {
    os << "  " << f.n;
    for (std::size_t pad = std::to_string(f.n).size(); pad < 10; ++pad) os << ' ';
    double kc = 0, kn = 0;
    for (const KsStat& k : f.vs_corrected) kc = std::max(kc, k.stat);
    for (const KsStat& k : f.vs_naive) kn = std::max(kn, k.stat);
    os << kc << "          " << kn << "\n";
  }
  for (const Verdict& v : verdicts)
    os << "  [" << (v.pass ? "PASS" : "FAIL") << "] " << v.name << " (tolerance " << v.tolerance
       << "): " << v.detail << "\n";
  os << (pass ? "VERDICT: PASS" : "VERDICT: FAIL") << "\n";
  return os.str();
}

}  // namespace homog
