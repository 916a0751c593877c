#pragma once

#include <string>

#include "loco/bench.h"

namespace loco {

// YAML experiment description with sections env, eval, fgd, pessimism and
// experiment. Unknown sections or keys are rejected.
ExperimentConfig parse_experiment_config(const std::string& yaml_text);
ExperimentConfig load_experiment_config(const std::string& path);

}  // namespace loco
