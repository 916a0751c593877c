#pragma once

#include <string>

#include "loco/bench.h"

namespace loco {

// JSON model summary written by `fit` and read by `eval`. Matrices are stored
// as row-major nested arrays.
std::string model_to_json(const FittedModel& model);
FittedModel model_from_json(const std::string& text);

void save_model(const std::string& path, const FittedModel& model);
FittedModel load_model(const std::string& path);

}  // namespace loco
