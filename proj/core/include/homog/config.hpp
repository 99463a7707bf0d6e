#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "homog/drivers.hpp"
#include "homog/tolerances.hpp"

namespace homog {

enum class Stage { Estimate, Paths, Fast, Sde, Compare, Moments, Cohomology };

std::string stage_name(Stage s);

struct CenteringSpec {
  bool empirical = false;
  long n_samples = 1000000;
};

struct ObservableSpec {
  std::string name = "cos2pi";
  CenteringSpec centering;
};

struct SlowSystemSpec {
  std::string name = "mcshane";  // mcshane | linear
  std::vector<std::vector<double>> A, B;  // linear only
  std::vector<double> xi;
};

struct FlowEstimationSpec {
  double t_max = 20.0;
  double quad_dt = 0.005;
  double corr_dt = 0.05;
  double orbit_time = 50000.0;
};

struct EstimationSpec {
  std::string method = "auto";  // auto | green-kubo-discrete | green-kubo-flow | induced
  long orbit_len = 10000000;
  int lag = 0;  // 0 = adaptive
  int lag_cap = 200;
  bool bartlett = false;
  FlowEstimationSpec flow;
};

struct SdeSpec {
  double dt = 0.001;
  std::string scheme = "ito-euler";  // corrected-ensemble scheme
};

struct MomentsSpec {
  int p = 2;
  std::vector<double> t_grid = {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
  long n = 1000;
  long n_paths = 10000;
};

struct CohomologySpec {
  std::string v_hat = "cos2pi";
  std::string chi = "cos4pi";
  long n = 1000000;
  double T = 1.0;
  std::string prediction = "orbit";  // orbit | quadrature
};

struct EnsembleSpec {
  long fast_paths = 10000;
  long sde_paths = 100000;
  long paths_stage = 10;
};

struct ExperimentConfig {
  int schema_version = 1;
  SystemSpec driver;
  ObservableSpec observable;
  SlowSystemSpec slow_system;
  std::vector<long> scaling_n = {100, 1000, 10000};
  double horizon_T = 1.0;
  EnsembleSpec ensembles;
  EstimationSpec estimation;
  SdeSpec sde;
  MomentsSpec moments;
  CohomologySpec cohomology;
  std::vector<Stage> stages;
  std::uint64_t master_seed = 0;
  ToleranceSet tolerances;
  std::string output_dir = "out";
  int threads = 1;

  std::string canonical_json() const;  // resolved config, sorted keys
  std::string hash() const;            // FNV-1a of canonical_json
};

// Parse and validate a JSON config document. Returns the fully resolved
// config with defaults filled, or throws ConfigError carrying the complete
// list of violations (JSON-pointer style paths).
ExperimentConfig validate_config(const std::string& json_text);

// The JSON schema document shipped in-repo and printed by `homogenize schema`.
std::string config_schema_json();

}  // namespace homog
