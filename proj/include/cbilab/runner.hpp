#pragma once

#include <string>

#include "cbilab/config.hpp"

namespace cbilab {

// Executes the experiment described by a config file; writes report.json and
// table.csv (plus samples for simulate runs) into the output directory.
// Returns 0 when the verdict passes, 2 when it fails, 1 on execution errors.
int run_experiment(const std::string& config_path);

// catalogue of mechanism presets with classification and log-moment flags
std::string preset_catalogue_text();

constexpr const char* kVersion = "0.1.0";

}  // namespace cbilab
