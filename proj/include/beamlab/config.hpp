#pragma once

#include <filesystem>
#include <string>

#include "beamlab/experiment.hpp"

namespace beamlab {

/// Loads an ExperimentConfig from a JSON file. Every key is optional and
/// defaults to the standard setting (desk-scale sample count, both channel
/// conditions, all subset sizes, the published hyperparameters), so "{}"
/// reproduces the reference configuration. Unknown keys are rejected.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Parses config text directly (same schema as load_config).
ExperimentConfig parse_config(const std::string& text);

}  // namespace beamlab
