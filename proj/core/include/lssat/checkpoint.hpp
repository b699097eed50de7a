#pragma once

#include <filesystem>
#include <string>

#include "lssat/model.hpp"

namespace lssat {

// On disk: the 6-byte magic "LSSAT1", a newline, the JSON manifest length as
// a little-endian uint64, the manifest (preset, geometry, task, parameter
// names/shapes/offsets, optional config echo), then all parameter values as
// row-major little-endian float64 in manifest order.
struct Checkpoint {
  ModelSpec spec;
  ParameterStore params;
  std::string config_json;
};

void save_checkpoint(const std::filesystem::path& path, const ModelSpec& spec,
                     const ParameterStore& params, const std::string& config_json = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lssat
