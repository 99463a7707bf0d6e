#include "homog/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "homog/analysis.hpp"
#include "homog/errors.hpp"
#include "homog/estimators.hpp"
#include "homog/pathgen.hpp"
#include "homog/rng.hpp"
#include "homog/solvers.hpp"
#include "homog/threading.hpp"

namespace homog {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kArtifactVersion = "1.0.0";

std::string fmt17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

long csv_rows(const std::string& content) {
  long lines = 0;
  for (char c : content)
    if (c == '\n') ++lines;
  return lines > 0 ? lines - 1 : 0;  // minus header
}

// All writes go through here: tmp file + rename, file inventory recorded.
class OutputTree {
public:
  OutputTree(std::string root, std::vector<FileRecord>& records)
      : root_(std::move(root)), records_(records) {}

  void write(const std::string& rel, const std::string& content, bool count_rows) {
    const fs::path full = fs::path(root_) / rel;
    fs::create_directories(full.parent_path());
    const fs::path tmp = full.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw Error("run_experiment: cannot open " + tmp.string());
      out << content;
      if (!out) throw Error("run_experiment: short write to " + tmp.string());
    }
    fs::rename(tmp, full);
    records_.push_back({rel, content.size(), count_rows ? csv_rows(content) : 0});
  }

private:
  std::string root_;
  std::vector<FileRecord>& records_;
};

struct RunState {
  DriverSystem sys;
  Observable obs;
  SdeSystem slow;
  bool have_stats = false;
  DiffusionStats stats;
  std::vector<LabeledEnsemble> fast;        // endpoints per scaling n
  std::vector<Vec> sde_corrected, sde_naive;
};

SdeSystem build_slow_system(const ExperimentConfig& cfg) {
  if (cfg.slow_system.name == "mcshane") return mcshane_system();
  const int d = static_cast<int>(cfg.slow_system.A.size());
  const int e = static_cast<int>(cfg.slow_system.B.empty() ? 0 : cfg.slow_system.B[0].size());
  Mat A(d, d), B(d, e);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) A(i, k) = cfg.slow_system.A[i][k];
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < e; ++k) B(i, k) = cfg.slow_system.B[i][k];
  return linear_system(A, B, cfg.slow_system.xi);
}

std::string endpoints_csv(const std::vector<Vec>& pts, int d) {
  std::ostringstream os;
  os << "trajectory";
  for (int i = 1; i <= d; ++i) os << ",X_" << i;
  os << "\n";
  for (size_t k = 0; k < pts.size(); ++k) {
    os << k;
    for (int i = 0; i < d; ++i) os << ',' << fmt17(pts[k][i]);
    os << "\n";
  }
  return os.str();
}

std::string path_csv_string(const PathPair& p) {
  std::ostringstream os;
  const int e = p.dim;
  os << "t";
  for (int i = 1; i <= e; ++i) os << ",W_" << i;
  for (int i = 1; i <= e; ++i)
    for (int j = 1; j <= e; ++j) os << ",WW_" << i << j;
  os << "\n";
  for (long k = 0; k < p.points(); ++k) {
    os << fmt17(p.time_at(k));
    for (int i = 0; i < e; ++i) os << ',' << fmt17(p.W[static_cast<size_t>(k) * e + i]);
    for (int i = 0; i < e * e; ++i) os << ',' << fmt17(p.WW[static_cast<size_t>(k) * e * e + i]);
    os << "\n";
  }
  return os.str();
}

void stage_estimate(const ExperimentConfig& cfg, RunState& st, OutputTree& out) {
  std::string method = cfg.estimation.method;
  if (method == "auto") {
    if (!st.sys.is_flow) method = "green-kubo-discrete";
    else if (st.sys.kind == SystemKind::Suspension) method = "induced";
    else method = "green-kubo-flow";
  }
  const std::uint64_t seed = derive_seed(cfg.master_seed, 0xE5);
  if (method == "green-kubo-discrete") {
    GkOptions o;
    o.lag_cap = cfg.estimation.lag_cap;
    o.bartlett = cfg.estimation.bartlett;
    st.stats = green_kubo_discrete(st.sys, st.obs, cfg.estimation.lag, cfg.estimation.orbit_len, seed, o);
  } else if (method == "induced") {
    InducedOptions o;
    o.gk.lag_cap = cfg.estimation.lag_cap;
    o.gk.bartlett = cfg.estimation.bartlett;
    st.stats = induced_stats(st.sys, st.obs, cfg.estimation.orbit_len, seed, o);
  } else {
    GkFlowOptions o;
    o.corr_dt = cfg.estimation.flow.corr_dt;
    st.stats = green_kubo_flow(st.sys, st.obs, cfg.estimation.flow.t_max, cfg.estimation.flow.quad_dt,
                               cfg.estimation.flow.orbit_time, seed, o);
  }
  st.have_stats = true;
  out.write("estimate/stats.json", st.stats.to_json() + "\n", false);
}

void stage_paths(const ExperimentConfig& cfg, RunState& st, OutputTree& out) {
  const long n = cfg.scaling_n.front();
  for (long i = 0; i < cfg.ensembles.paths_stage; ++i) {
    const std::uint64_t seed = derive_seed(cfg.master_seed, 0x9A000 + static_cast<std::uint64_t>(i));
    PathPair p;
    if (st.sys.is_flow) {
      const double qdt = st.sys.kind == SystemKind::Lorenz ? st.sys.lorenz.dt_internal : 0.01;
      p = flow_path(st.sys, st.obs, n, cfg.horizon_T, qdt, seed);
    } else {
      p = discrete_path(st.sys, st.obs, n, cfg.horizon_T, seed);
    }
    std::ostringstream name;
    name << "paths/path_" << i;
    out.write(name.str() + ".csv", path_csv_string(p), true);
    json meta = {{"driver", p.meta.driver}, {"observable", p.meta.observable}, {"n", p.meta.n},
                 {"T", p.meta.T},           {"seed", p.meta.seed},             {"flow", p.meta.flow},
                 {"quad_dt", p.meta.quad_dt}, {"points", p.points()}};
    out.write(name.str() + ".json", meta.dump(2) + "\n", false);
  }
}

void stage_fast(const ExperimentConfig& cfg, RunState& st, OutputTree& out) {
  for (long n : cfg.scaling_n) {
    LabeledEnsemble ens;
    ens.n = n;
    ens.T = cfg.horizon_T;
    ens.X.resize(cfg.ensembles.fast_paths);
    const std::uint64_t seed = derive_seed(cfg.master_seed, 0xFA000 + static_cast<std::uint64_t>(n));
    if (st.sys.is_flow) {
      const double qdt = st.sys.kind == SystemKind::Lorenz ? st.sys.lorenz.dt_internal : 0.01;
      parallel_for(cfg.ensembles.fast_paths, cfg.threads, [&](long i) {
        Trajectory tr = solve_fast_flow(st.slow, st.sys, st.obs, n, cfg.horizon_T, qdt,
                                        derive_seed(seed, static_cast<std::uint64_t>(i)));
        ens.X[i] = tr.endpoint();
      });
    } else {
      parallel_for(cfg.ensembles.fast_paths, cfg.threads, [&](long i) {
        ens.X[i] = fast_discrete_endpoint(st.slow, st.sys, st.obs, n, cfg.horizon_T,
                                          derive_seed(seed, static_cast<std::uint64_t>(i)));
      });
    }
    std::ostringstream name;
    name << "fast/endpoints_n" << n << ".csv";
    out.write(name.str(), endpoints_csv(ens.X, st.slow.d), true);
    st.fast.push_back(std::move(ens));
  }
}

void stage_sde(const ExperimentConfig& cfg, RunState& st, OutputTree& out) {
  if (!st.have_stats) throw Error("sde stage requires estimate results");
  SdeRunOptions o;
  o.T = cfg.horizon_T;
  o.threads = cfg.threads;
  const SdeScheme corrected_scheme =
      cfg.sde.scheme == "strat-heun" ? SdeScheme::StratHeun : SdeScheme::ItoEuler;

  const std::uint64_t seed_c = derive_seed(cfg.master_seed, 0x5DEC);
  auto corrected = solve_limit_sde(st.slow, st.stats, corrected_scheme, cfg.sde.dt,
                                   cfg.ensembles.sde_paths, seed_c, o);
  st.sde_corrected.reserve(corrected.size());
  for (const Trajectory& tr : corrected) st.sde_corrected.push_back(tr.endpoint());

  // naive Wong-Zakai comparator: Stratonovich reading, no Levy-area drift
  o.apply_correction = false;
  const std::uint64_t seed_n = derive_seed(cfg.master_seed, 0x5DE2);
  auto naive = solve_limit_sde(st.slow, st.stats, SdeScheme::StratHeun, cfg.sde.dt,
                               cfg.ensembles.sde_paths, seed_n, o);
  st.sde_naive.reserve(naive.size());
  for (const Trajectory& tr : naive) st.sde_naive.push_back(tr.endpoint());

  out.write("sde/corrected.csv", endpoints_csv(st.sde_corrected, st.slow.d), true);
  out.write("sde/naive.csv", endpoints_csv(st.sde_naive, st.slow.d), true);
  json meta = {{"dt", cfg.sde.dt},
               {"scheme_corrected", cfg.sde.scheme},
               {"scheme_naive", "strat-heun (no correction)"},
               {"paths", cfg.ensembles.sde_paths},
               {"T", cfg.horizon_T},
               {"stats_fingerprint", st.stats.to_json(-1).size()},
               {"stats_method", method_name(st.stats.method)}};
  out.write("sde/meta.json", meta.dump(2) + "\n", false);
}

void stage_compare(const ExperimentConfig& cfg, RunState& st, OutputTree& out) {
  LabeledEnsemble corr{0, cfg.horizon_T, st.sde_corrected};
  LabeledEnsemble nai{0, cfg.horizon_T, st.sde_naive};
  ComparisonReport rep = convergence_report(st.fast, corr, nai, st.stats.levy_area(),
                                            st.stats.combined_se(), cfg.tolerances);
  rep.provenance_fast = "fast stage endpoints, driver " + st.sys.name();
  rep.provenance_corrected = "sde stage, corrected " + cfg.sde.scheme;
  rep.provenance_naive = "sde stage, naive strat-heun";
  out.write("compare/report.json", rep.to_json() + "\n", false);
  out.write("compare/report.txt", rep.to_text(), false);

  for (int c = 0; c < st.slow.d; ++c) {
    auto dump_cdf = [&](const std::vector<Vec>& xs, const std::string& rel) {
      std::ostringstream os;
      os << "x,F\n";
      for (auto [x, F] : ecdf_curve(xs, c)) os << fmt17(x) << ',' << fmt17(F) << "\n";
      out.write(rel, os.str(), true);
    };
    for (const auto& f : st.fast) {
      std::ostringstream rel;
      rel << "compare/cdf_fast_n" << f.n << "_coord" << (c + 1) << ".csv";
      dump_cdf(f.X, rel.str());
    }
    std::ostringstream rc, rn;
    rc << "compare/cdf_corrected_coord" << (c + 1) << ".csv";
    rn << "compare/cdf_naive_coord" << (c + 1) << ".csv";
    dump_cdf(st.sde_corrected, rc.str());
    dump_cdf(st.sde_naive, rn.str());
  }
}

void stage_moments(const ExperimentConfig& cfg, RunState& st, OutputTree& out) {
  if (st.sys.is_flow) throw Error("moments stage supports map drivers only");
  MomentSlopeResult res =
      moment_slope(st.sys, st.obs, cfg.moments.p, cfg.moments.n, cfg.moments.t_grid,
                   cfg.moments.n_paths, derive_seed(cfg.master_seed, 0x300), cfg.threads);
  json j = {{"defined", res.defined},
            {"slope_W", res.defined ? json(res.slope_W) : json()},
            {"slope_WW", res.defined ? json(res.slope_WW) : json()},
            {"p", res.p},
            {"expected_slope_W", 0.5},
            {"expected_slope_WW", 1.0},
            {"tolerance", json::array({"slope-w", "slope-ww"})}};
  out.write("moments/slopes.json", j.dump(2) + "\n", false);
  std::ostringstream os;
  os << "t,norm_W,norm_WW\n";
  for (size_t i = 0; i < res.t.size(); ++i)
    os << fmt17(res.t[i]) << ',' << fmt17(res.norm_W[i]) << ',' << fmt17(res.norm_WW[i]) << "\n";
  out.write("moments/norms.csv", os.str(), true);
}

void stage_cohomology(const ExperimentConfig& cfg, RunState& st, OutputTree& out) {
  if (st.sys.is_flow) throw Error("cohomology stage supports map drivers only");
  CohomologyTriple triple = make_cohomology_triple(st.sys, make_observable(cfg.cohomology.v_hat),
                                                   make_observable(cfg.cohomology.chi));
  const PredictionMethod pm = cfg.cohomology.prediction == "quadrature"
                                  ? PredictionMethod::Quadrature
                                  : PredictionMethod::OrbitAverage;
  CohomologyShift sh = cohomology_shift(st.sys, triple, cfg.cohomology.n, cfg.cohomology.T,
                                        derive_seed(cfg.master_seed, 0xC0), pm);
  auto mat = [](const Mat& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(row);
    }
    return rows;
  };
  json j = {{"observed", mat(sh.observed)},
            {"predicted", mat(sh.predicted)},
            {"tolerance_scale", mat(sh.tolerance_scale)},
            {"n", sh.n},
            {"T", sh.T},
            {"prediction", cfg.cohomology.prediction},
            {"tolerance", "cohomology"}};
  out.write("cohomology/shift.json", j.dump(2) + "\n", false);
}

}  // namespace

std::string RunManifest::to_json(int indent) const {
  json j;
  j["config_hash"] = config_hash;
  j["artifact_version"] = artifact_version;
  j["status"] = status;
  if (!failed_stage.empty()) j["failed_stage"] = failed_stage;
  if (!error.empty()) j["error"] = error;
  json tj = json::array();
  for (const auto& t : timings) tj.push_back({{"stage", t.stage}, {"ms", t.ms}});
  j["timings"] = tj;
  json fj = json::array();
  for (const auto& f : files) fj.push_back({{"path", f.path}, {"bytes", f.bytes}, {"rows", f.rows}});
  j["files"] = fj;
  json tolj;
  for (const auto& t : tolerances.entries()) tolj[t.name] = t.value;
  j["tolerances"] = tolj;
  return j.dump(indent);
}

RunManifest run_experiment(const ExperimentConfig& cfg) {
  RunManifest man;
  man.config_hash = cfg.hash();
  man.artifact_version = kArtifactVersion;
  man.tolerances = cfg.tolerances;
  man.status = "ok";

  fs::create_directories(cfg.output_dir);
  OutputTree out(cfg.output_dir, man.files);

  RunState st;
  st.sys = make_system(cfg.driver);
  st.obs = make_observable(cfg.observable.name);
  if (cfg.observable.centering.empirical)
    st.obs = center_observable(st.sys, st.obs, cfg.observable.centering.n_samples,
                               derive_seed(cfg.master_seed, 0xCE));
  st.slow = build_slow_system(cfg);

  auto write_manifest = [&] {
    const fs::path tmp = fs::path(cfg.output_dir) / "manifest.json.tmp";
    const fs::path final_path = fs::path(cfg.output_dir) / "manifest.json";
    std::ofstream f(tmp, std::ios::binary);
    f << man.to_json() << "\n";
    f.close();
    fs::rename(tmp, final_path);
  };

  for (Stage s : cfg.stages) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      switch (s) {
        case Stage::Estimate: stage_estimate(cfg, st, out); break;
        case Stage::Paths: stage_paths(cfg, st, out); break;
        case Stage::Fast: stage_fast(cfg, st, out); break;
        case Stage::Sde: stage_sde(cfg, st, out); break;
        case Stage::Compare: stage_compare(cfg, st, out); break;
        case Stage::Moments: stage_moments(cfg, st, out); break;
        case Stage::Cohomology: stage_cohomology(cfg, st, out); break;
      }
    } catch (const std::exception& ex) {
      man.status = "failed";
      man.failed_stage = stage_name(s);
      man.error = ex.what();
      write_manifest();
      throw Error("stage '" + stage_name(s) + "' failed: " + ex.what());
    }
    const auto t1 = std::chrono::steady_clock::now();
    man.timings.push_back({stage_name(s), std::chrono::duration<double, std::milli>(t1 - t0).count()});
  }
  write_manifest();
  return man;
}

}  // namespace homog
