#pragma once

#include <optional>
#include <string>

#include "aegis/model.hpp"

namespace aegis {

/// Model checkpoint ("AEGM"): hyperparameters, entropy baseline/threshold,
/// NormStats, then every tensor in visit order as
/// (u32 name length, name, u32 rank, u32 dims..., f32 data). Layout table in
/// docs/formats.md.
void save_checkpoint(const std::string& path, ModelParams<float>& params);

/// Load a checkpoint. Throws BadMagic / VersionMismatch / Truncated /
/// DimMismatch; a failed load leaves no partial state behind.
ModelParams<float> load_checkpoint(const std::string& path);

/// Load and require specific hyperparameters; throws DimMismatch when the
/// file disagrees.
ModelParams<float> load_checkpoint(const std::string& path, const Hyper& expected);

} // namespace aegis
