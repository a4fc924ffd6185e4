#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cir/composer.hpp"

namespace cir {

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::vector<double> losses;
};

// Writes a JSON manifest to `path` and the weights, in the CIRF float32
// format (one row holding every weight in tensor order, tau excluded), to
// `path` + ".weights".
void save_checkpoint(const std::filesystem::path& path, const ComposerParams& params, const CheckpointInfo& info);

struct LoadedCheckpoint {
  ComposerParams params;
  CheckpointInfo info;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cir
