#pragma once

#include <string>

#include "citrus/layer.hpp"

namespace citrus {

// Plain-text checkpoint. Every number is written as a C99 hexadecimal float,
// so save -> load reproduces each parameter bit for bit. The file carries the
// factor bases too, so a loaded model can run without its source graphs.

std::string serialize_model(const CitrusModel& model);
CitrusModel deserialize_model(const std::string& text);

void save_checkpoint(const CitrusModel& model, const std::string& path);
CitrusModel load_checkpoint(const std::string& path);

}  // namespace citrus
