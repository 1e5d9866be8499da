#pragma once

#include <string>

#include "fsner/train.hpp"

namespace fsner {

// Versioned binary checkpoint: magic + version, config snapshot, named
// parameter tensors (little-endian float64), abstract transition counts and
// the root seed. save -> load -> save is byte identical.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

std::string checkpoint_bytes(const Model& model);
Model checkpoint_from_bytes(const std::string& bytes);

}  // namespace fsner
