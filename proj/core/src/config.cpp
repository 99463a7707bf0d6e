#include "homog/config.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "homog/errors.hpp"

namespace homog {

using nlohmann::json;

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::Estimate: return "estimate";
    case Stage::Paths: return "paths";
    case Stage::Fast: return "fast";
    case Stage::Sde: return "sde";
    case Stage::Compare: return "compare";
    case Stage::Moments: return "moments";
    case Stage::Cohomology: return "cohomology";
  }
  return "?";
}

namespace {

const std::vector<std::string> kStageNames = {"estimate", "paths", "fast", "sde",
                                              "compare", "moments", "cohomology"};

struct Violations {
  std::vector<std::string> list;
  void add(const std::string& path, const std::string& msg) { list.push_back(path + ": " + msg); }
  bool empty() const { return list.empty(); }
};

json driver_to_json(const SystemSpec& d) {
  json j;
  j["kind"] = kind_name(d.kind);
  if (d.kind == SystemKind::PomeauManneville) j["alpha"] = d.pm_alpha;
  if (d.kind == SystemKind::Lorenz) {
    j["sigma"] = d.lorenz.sigma;
    j["rho"] = d.lorenz.rho;
    j["beta"] = d.lorenz.beta;
    j["dt_internal"] = d.lorenz.dt_internal;
  }
  if (d.kind == SystemKind::Suspension) {
    j["base"] = driver_to_json(*d.base);
    j["roof"] = {{"c0", d.roof.c0}, {"c1", d.roof.c1}};
  }
  return j;
}

SystemSpec driver_from_json(const json& j, const std::string& path, Violations& err, int depth = 0) {
  SystemSpec d;
  if (!j.is_object()) {
    err.add(path, "must be an object");
    return d;
  }
  const std::string kind = j.value("kind", std::string());
  if (kind == "doubling") {
    d.kind = SystemKind::Doubling;
  } else if (kind == "pomeau-manneville") {
    d.kind = SystemKind::PomeauManneville;
    d.pm_alpha = j.value("alpha", 0.0);
    if (!(d.pm_alpha >= 0.0 && d.pm_alpha < 1.0))
      err.add(path + "/alpha", "must lie in [0,1)");
  } else if (kind == "cat") {
    d.kind = SystemKind::CatMap;
  } else if (kind == "lorenz") {
    d.kind = SystemKind::Lorenz;
    d.lorenz.sigma = j.value("sigma", 10.0);
    d.lorenz.rho = j.value("rho", 28.0);
    d.lorenz.beta = j.value("beta", 8.0 / 3.0);
    d.lorenz.dt_internal = j.value("dt_internal", 0.005);
    if (!(d.lorenz.dt_internal > 0.0 && d.lorenz.dt_internal <= 0.05))
      err.add(path + "/dt_internal", "must lie in (0, 0.05]");
  } else if (kind == "suspension") {
    d.kind = SystemKind::Suspension;
    if (depth > 0) {
      err.add(path, "nested suspensions are not supported");
      return d;
    }
    if (!j.contains("base")) {
      err.add(path + "/base", "required for suspension drivers");
    } else {
      d.base = std::make_shared<SystemSpec>(driver_from_json(j["base"], path + "/base", err, depth + 1));
      if (d.base->kind == SystemKind::Lorenz || d.base->kind == SystemKind::Suspension)
        err.add(path + "/base", "suspension base must be a map kind");
    }
    if (j.contains("roof")) {
      d.roof.c0 = j["roof"].value("c0", 1.0);
      d.roof.c1 = j["roof"].value("c1", 0.0);
    }
    if (!(d.roof.lower_bound() > 0.0))
      err.add(path + "/roof", "roof must be bounded below by a positive constant on [0,1)");
  } else if (kind.empty()) {
    err.add(path + "/kind", "required");
  } else {
    err.add(path + "/kind", "unknown driver kind '" + kind + "'");
  }
  return d;
}

bool known_observable(const std::string& name) {
  const auto names = observable_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

}  // namespace

std::string ExperimentConfig::canonical_json() const {
  json j;
  j["schema_version"] = schema_version;
  j["driver"] = driver_to_json(driver);
  j["observable"] = {{"name", observable.name},
                     {"centering",
                      {{"mode", observable.centering.empirical ? "empirical" : "analytic"},
                       {"n_samples", observable.centering.n_samples}}}};
  j["slow_system"] = {{"name", slow_system.name}};
  if (slow_system.name == "linear") {
    j["slow_system"]["A"] = slow_system.A;
    j["slow_system"]["B"] = slow_system.B;
    j["slow_system"]["xi"] = slow_system.xi;
  }
  j["scaling_n"] = scaling_n;
  j["horizon_T"] = horizon_T;
  j["ensembles"] = {{"fast_paths", ensembles.fast_paths},
                    {"sde_paths", ensembles.sde_paths},
                    {"paths_stage", ensembles.paths_stage}};
  j["estimation"] = {{"method", estimation.method},
                     {"orbit_len", estimation.orbit_len},
                     {"lag", estimation.lag},
                     {"lag_cap", estimation.lag_cap},
                     {"bartlett", estimation.bartlett},
                     {"flow",
                      {{"t_max", estimation.flow.t_max},
                       {"quad_dt", estimation.flow.quad_dt},
                       {"corr_dt", estimation.flow.corr_dt},
                       {"orbit_time", estimation.flow.orbit_time}}}};
  j["sde"] = {{"dt", sde.dt}, {"scheme", sde.scheme}};
  j["moments"] = {{"p", moments.p}, {"t_grid", moments.t_grid}, {"n", moments.n},
                  {"n_paths", moments.n_paths}};
  j["cohomology"] = {{"v_hat", cohomology.v_hat}, {"chi", cohomology.chi}, {"n", cohomology.n},
                     {"T", cohomology.T}, {"prediction", cohomology.prediction}};
  json st = json::array();
  for (Stage s : stages) st.push_back(stage_name(s));
  j["stages"] = st;
  j["seeds"] = {{"master", master_seed}};
  json tolj;
  for (const auto& t : tolerances.entries()) tolj[t.name] = t.value;
  j["tolerances"] = tolj;
  j["output_dir"] = output_dir;
  j["threads"] = threads;
  return j.dump();
}

std::string ExperimentConfig::hash() const {
  // FNV-1a, stable across runs and platforms.
  const std::string s = canonical_json();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

ExperimentConfig validate_config(const std::string& json_text) {
  Violations err;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& ex) {
    throw ConfigError("config is not valid JSON", {std::string("/: ") + ex.what()});
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object", {"/: not an object"});

  ExperimentConfig cfg;

  if (!j.contains("schema_version"))
    err.add("/schema_version", "required (this artifact reads schema_version 1)");
  else if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != 1)
    err.add("/schema_version", "must be the integer 1");

  if (!j.contains("driver"))
    err.add("/driver", "required");
  else
    cfg.driver = driver_from_json(j["driver"], "/driver", err);

  if (j.contains("observable")) {
    const json& o = j["observable"];
    cfg.observable.name = o.value("name", std::string());
    if (cfg.observable.name.empty())
      err.add("/observable/name", "required");
    else if (!known_observable(cfg.observable.name))
      err.add("/observable/name", "unknown observable '" + cfg.observable.name + "'");
    if (o.contains("centering")) {
      const std::string mode = o["centering"].value("mode", "analytic");
      if (mode == "empirical")
        cfg.observable.centering.empirical = true;
      else if (mode != "analytic")
        err.add("/observable/centering/mode", "must be 'analytic' or 'empirical'");
      cfg.observable.centering.n_samples = o["centering"].value("n_samples", 1000000L);
      if (cfg.observable.centering.empirical && cfg.observable.centering.n_samples < 100000)
        err.add("/observable/centering/n_samples", "empirical centering needs >= 1e5 samples");
    }
  } else {
    err.add("/observable", "required");
  }

  if (j.contains("slow_system")) {
    const json& s = j["slow_system"];
    cfg.slow_system.name = s.value("name", std::string("mcshane"));
    if (cfg.slow_system.name == "linear") {
      if (!s.contains("A") || !s.contains("B") || !s.contains("xi")) {
        err.add("/slow_system", "linear systems need A, B and xi");
      } else {
        cfg.slow_system.A = s["A"].get<std::vector<std::vector<double>>>();
        cfg.slow_system.B = s["B"].get<std::vector<std::vector<double>>>();
        cfg.slow_system.xi = s["xi"].get<std::vector<double>>();
        const size_t d = cfg.slow_system.A.size();
        if (d == 0 || cfg.slow_system.A[0].size() != d)
          err.add("/slow_system/A", "must be square and nonempty");
        if (cfg.slow_system.B.size() != d) err.add("/slow_system/B", "row count must match A");
        if (cfg.slow_system.xi.size() != d) err.add("/slow_system/xi", "length must match A");
      }
    } else if (cfg.slow_system.name != "mcshane") {
      err.add("/slow_system/name", "must be 'mcshane' or 'linear'");
    }
  }

  if (j.contains("scaling_n")) {
    cfg.scaling_n.clear();
    for (const auto& v : j["scaling_n"]) {
      const long n = v.get<long>();
      if (n < 1) err.add("/scaling_n", "entries must be >= 1");
      cfg.scaling_n.push_back(n);
    }
    if (cfg.scaling_n.empty()) err.add("/scaling_n", "must not be empty");
  }

  cfg.horizon_T = j.value("horizon_T", 1.0);
  if (!(cfg.horizon_T > 0.0)) err.add("/horizon_T", "must be > 0");

  if (j.contains("ensembles")) {
    const json& en = j["ensembles"];
    cfg.ensembles.fast_paths = en.value("fast_paths", cfg.ensembles.fast_paths);
    cfg.ensembles.sde_paths = en.value("sde_paths", cfg.ensembles.sde_paths);
    cfg.ensembles.paths_stage = en.value("paths_stage", cfg.ensembles.paths_stage);
    if (cfg.ensembles.fast_paths < 100) err.add("/ensembles/fast_paths", "must be >= 100");
    if (cfg.ensembles.sde_paths < 100) err.add("/ensembles/sde_paths", "must be >= 100");
    if (cfg.ensembles.paths_stage < 1) err.add("/ensembles/paths_stage", "must be >= 1");
  }

  if (j.contains("estimation")) {
    const json& es = j["estimation"];
    cfg.estimation.method = es.value("method", std::string("auto"));
    const std::vector<std::string> methods = {"auto", "green-kubo-discrete", "green-kubo-flow", "induced"};
    if (std::find(methods.begin(), methods.end(), cfg.estimation.method) == methods.end())
      err.add("/estimation/method", "unknown estimation method '" + cfg.estimation.method + "'");
    cfg.estimation.orbit_len = es.value("orbit_len", cfg.estimation.orbit_len);
    if (cfg.estimation.orbit_len < 20000) err.add("/estimation/orbit_len", "must be >= 2e4");
    cfg.estimation.lag = es.value("lag", 0);
    if (cfg.estimation.lag < 0) err.add("/estimation/lag", "must be >= 0 (0 selects adaptive)");
    cfg.estimation.lag_cap = es.value("lag_cap", 200);
    if (cfg.estimation.lag_cap < 1) err.add("/estimation/lag_cap", "must be >= 1");
    cfg.estimation.bartlett = es.value("bartlett", false);
    if (es.contains("flow")) {
      const json& fl = es["flow"];
      cfg.estimation.flow.t_max = fl.value("t_max", cfg.estimation.flow.t_max);
      cfg.estimation.flow.quad_dt = fl.value("quad_dt", cfg.estimation.flow.quad_dt);
      cfg.estimation.flow.corr_dt = fl.value("corr_dt", cfg.estimation.flow.corr_dt);
      cfg.estimation.flow.orbit_time = fl.value("orbit_time", cfg.estimation.flow.orbit_time);
      if (!(cfg.estimation.flow.t_max > 0.0)) err.add("/estimation/flow/t_max", "must be > 0");
      if (!(cfg.estimation.flow.quad_dt > 0.0)) err.add("/estimation/flow/quad_dt", "must be > 0");
      if (!(cfg.estimation.flow.orbit_time > 0.0)) err.add("/estimation/flow/orbit_time", "must be > 0");
    }
  }

  if (j.contains("sde")) {
    cfg.sde.dt = j["sde"].value("dt", 0.001);
    if (!(cfg.sde.dt > 0.0)) err.add("/sde/dt", "must be > 0");
    cfg.sde.scheme = j["sde"].value("scheme", std::string("ito-euler"));
    if (cfg.sde.scheme != "ito-euler" && cfg.sde.scheme != "strat-heun")
      err.add("/sde/scheme", "must be 'ito-euler' or 'strat-heun'");
  }

  if (j.contains("moments")) {
    const json& m = j["moments"];
    cfg.moments.p = m.value("p", 2);
    if (cfg.moments.p < 1) err.add("/moments/p", "must be >= 1");
    if (m.contains("t_grid")) cfg.moments.t_grid = m["t_grid"].get<std::vector<double>>();
    cfg.moments.n = m.value("n", cfg.moments.n);
    cfg.moments.n_paths = m.value("n_paths", cfg.moments.n_paths);
    if (cfg.moments.n_paths < 1000) err.add("/moments/n_paths", "must be >= 1e3");
    if (cfg.moments.t_grid.size() >= 2) {
      const auto [mn, mx] = std::minmax_element(cfg.moments.t_grid.begin(), cfg.moments.t_grid.end());
      if (!(*mn > 0.0) || *mx / *mn < 10.0 * (1.0 - 1e-12))
        err.add("/moments/t_grid", "must be positive and span at least one decade");
    } else {
      err.add("/moments/t_grid", "needs at least two points");
    }
  }

  if (j.contains("cohomology")) {
    const json& c = j["cohomology"];
    cfg.cohomology.v_hat = c.value("v_hat", cfg.cohomology.v_hat);
    cfg.cohomology.chi = c.value("chi", cfg.cohomology.chi);
    if (!known_observable(cfg.cohomology.v_hat)) err.add("/cohomology/v_hat", "unknown observable");
    if (!known_observable(cfg.cohomology.chi)) err.add("/cohomology/chi", "unknown observable");
    cfg.cohomology.n = c.value("n", cfg.cohomology.n);
    cfg.cohomology.T = c.value("T", cfg.cohomology.T);
    cfg.cohomology.prediction = c.value("prediction", std::string("orbit"));
    if (cfg.cohomology.prediction != "orbit" && cfg.cohomology.prediction != "quadrature")
      err.add("/cohomology/prediction", "must be 'orbit' or 'quadrature'");
  }

  bool needs_estimation = false;
  if (!j.contains("stages") || !j["stages"].is_array() || j["stages"].empty()) {
    err.add("/stages", "a nonempty stage list is required");
  } else {
    std::vector<std::string> requested;
    for (const auto& s : j["stages"]) {
      const std::string name = s.get<std::string>();
      if (std::find(kStageNames.begin(), kStageNames.end(), name) == kStageNames.end()) {
        err.add("/stages", "unknown stage '" + name + "'");
        continue;
      }
      requested.push_back(name);
    }
    auto has = [&](const char* n) {
      return std::find(requested.begin(), requested.end(), n) != requested.end();
    };
    if (has("sde") && !has("estimate")) err.add("/stages", "'sde' requires the 'estimate' stage");
    if (has("compare") && !(has("fast") && has("sde")))
      err.add("/stages", "'compare' requires the 'fast' and 'sde' stages");
    if (has("compare") && cfg.scaling_n.size() < 2)
      err.add("/scaling_n", "'compare' needs at least two n values");
    needs_estimation = has("estimate") || has("sde") || has("compare");
    // fixed execution order regardless of the order requested
    for (const std::string& name : kStageNames)
      if (has(name.c_str()))
        cfg.stages.push_back(static_cast<Stage>(std::distance(
            kStageNames.begin(), std::find(kStageNames.begin(), kStageNames.end(), name))));
  }

  // WIP validity boundary: estimation stages refuse alpha >= 1/2.
  const SystemSpec* pm = nullptr;
  if (cfg.driver.kind == SystemKind::PomeauManneville) pm = &cfg.driver;
  if (cfg.driver.kind == SystemKind::Suspension && cfg.driver.base &&
      cfg.driver.base->kind == SystemKind::PomeauManneville)
    pm = cfg.driver.base.get();
  if (pm && pm->pm_alpha >= 0.5 && needs_estimation)
    err.add("/driver/alpha",
            "estimation stages require pomeau-manneville alpha < 1/2 "
            "(nonsummable-correlations regime)");

  if (!j.contains("seeds") || !j["seeds"].contains("master")) {
    err.add("/seeds/master", "seeds.master required (no wall-clock defaults)");
  } else {
    cfg.master_seed = j["seeds"]["master"].get<std::uint64_t>();
  }

  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    auto ov = [&](const char* name, double& slot) {
      if (t.contains(name)) slot = t[name].get<double>();
    };
    ov("3se", cfg.tolerances.se_consistency);
    ov("5se", cfg.tolerances.se_antisym);
    ov("slope-w", cfg.tolerances.slope_w_tol);
    ov("slope-ww", cfg.tolerances.slope_ww_tol);
    ov("ks-1pct", cfg.tolerances.ks_level);
    ov("chen", cfg.tolerances.chen_rel);
    ov("mcshane", cfg.tolerances.mcshane_rel);
    ov("centering", cfg.tolerances.centering_se);
    ov("gk-tail", cfg.tolerances.tail_ratio);
    ov("cohomology", cfg.tolerances.cohomology_factor);
  }

  cfg.output_dir = j.value("output_dir", std::string("out"));
  if (cfg.output_dir.empty()) err.add("/output_dir", "must not be empty");
  cfg.threads = j.value("threads", 1);
  if (cfg.threads < 1) err.add("/threads", "must be >= 1");

  // Cross checks that need several blocks resolved.
  if (err.empty()) {
    const Observable probe = make_observable(cfg.observable.name);
    if (cfg.slow_system.name == "mcshane" && probe.dim != 2)
      err.add("/observable/name", "the mcshane slow system needs a 2-component observable");
    if (cfg.slow_system.name == "linear" && !cfg.slow_system.B.empty() &&
        cfg.slow_system.B[0].size() != static_cast<size_t>(probe.dim))
      err.add("/slow_system/B", "column count must match the observable dimension");
  }

  if (!err.empty()) {
    std::ostringstream os;
    os << "config validation failed with " << err.list.size() << " violation"
       << (err.list.size() == 1 ? "" : "s");
    throw ConfigError(os.str(), err.list);
  }
  return cfg;
}

std::string config_schema_json() {
  // Kept in sync with docs/config.schema.json (shipped in-repo).
  static const char* schema = R"JSON({
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "homogenize experiment configuration",
  "type": "object",
  "required": ["schema_version", "driver", "observable", "stages", "seeds"],
  "properties": {
    "schema_version": {"const": 1},
    "driver": {"$ref": "#/definitions/driver"},
    "observable": {
      "type": "object",
      "required": ["name"],
      "properties": {
        "name": {"enum": ["cos2pi", "cos4pi", "fourier2", "fourier2s", "cat-trig2", "coords2", "coord1"]},
        "centering": {
          "type": "object",
          "properties": {
            "mode": {"enum": ["analytic", "empirical"]},
            "n_samples": {"type": "integer", "minimum": 100000}
          }
        }
      }
    },
    "slow_system": {
      "type": "object",
      "properties": {
        "name": {"enum": ["mcshane", "linear"]},
        "A": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "B": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "xi": {"type": "array", "items": {"type": "number"}}
      }
    },
    "scaling_n": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
    "horizon_T": {"type": "number", "exclusiveMinimum": 0},
    "ensembles": {
      "type": "object",
      "properties": {
        "fast_paths": {"type": "integer", "minimum": 100},
        "sde_paths": {"type": "integer", "minimum": 100},
        "paths_stage": {"type": "integer", "minimum": 1}
      }
    },
    "estimation": {
      "type": "object",
      "properties": {
        "method": {"enum": ["auto", "green-kubo-discrete", "green-kubo-flow", "induced"]},
        "orbit_len": {"type": "integer", "minimum": 20000},
        "lag": {"type": "integer", "minimum": 0},
        "lag_cap": {"type": "integer", "minimum": 1},
        "bartlett": {"type": "boolean"},
        "flow": {
          "type": "object",
          "properties": {
            "t_max": {"type": "number", "exclusiveMinimum": 0},
            "quad_dt": {"type": "number", "exclusiveMinimum": 0},
            "corr_dt": {"type": "number", "exclusiveMinimum": 0},
            "orbit_time": {"type": "number", "exclusiveMinimum": 0}
          }
        }
      }
    },
    "sde": {
      "type": "object",
      "properties": {
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "scheme": {"enum": ["ito-euler", "strat-heun"]}
      }
    },
    "moments": {
      "type": "object",
      "properties": {
        "p": {"type": "integer", "minimum": 1},
        "t_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2},
        "n": {"type": "integer", "minimum": 1},
        "n_paths": {"type": "integer", "minimum": 1000}
      }
    },
    "cohomology": {
      "type": "object",
      "properties": {
        "v_hat": {"type": "string"},
        "chi": {"type": "string"},
        "n": {"type": "integer", "minimum": 1},
        "T": {"type": "number", "exclusiveMinimum": 0},
        "prediction": {"enum": ["orbit", "quadrature"]}
      }
    },
    "stages": {
      "type": "array",
      "minItems": 1,
      "items": {"enum": ["estimate", "paths", "fast", "sde", "compare", "moments", "cohomology"]}
    },
    "seeds": {
      "type": "object",
      "required": ["master"],
      "properties": {"master": {"type": "integer", "minimum": 0}}
    },
    "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
    "output_dir": {"type": "string", "minLength": 1},
    "threads": {"type": "integer", "minimum": 1}
  },
  "definitions": {
    "driver": {
      "type": "object",
      "required": ["kind"],
      "properties": {
        "kind": {"enum": ["doubling", "pomeau-manneville", "cat", "lorenz", "suspension"]},
        "alpha": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "sigma": {"type": "number"},
        "rho": {"type": "number"},
        "beta": {"type": "number"},
        "dt_internal": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.05},
        "base": {"$ref": "#/definitions/driver"},
        "roof": {
          "type": "object",
          "properties": {"c0": {"type": "number"}, "c1": {"type": "number"}}
        }
      }
    }
  }
})JSON";
  return schema;
}

}  // namespace homog
