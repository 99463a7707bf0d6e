#pragma once

#include <string>
#include <vector>

#include "homog/config.hpp"

namespace homog {

struct StageTiming {
  std::string stage;
  double ms = 0.0;
};

struct FileRecord {
  std::string path;  // relative to the output directory
  std::uint64_t bytes = 0;
  long rows = 0;  // data rows for CSV files, 0 for JSON/text
};

struct RunManifest {
  std::string config_hash;
  std::string artifact_version;
  std::string status;        // "ok" or "failed"
  std::string failed_stage;  // set when status == "failed"
  std::string error;
  std::vector<StageTiming> timings;
  std::vector<FileRecord> files;
  ToleranceSet tolerances;

  std::string to_json(int indent = 2) const;
};

// Execute the requested stages in order; outputs land under
// <output_dir>/<stage>/<name>.{csv,json} plus <output_dir>/manifest.json.
// The manifest is written atomically after all outputs (and also on stage
// failure, marked failed-at-stage, before the error is rethrown).
RunManifest run_experiment(const ExperimentConfig& cfg);

}  // namespace homog
