#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "shearo/core/tensor.hpp"

namespace shearo::nn {

using NamedTensors = std::map<std::string, Tensor>;

/// Binary parameter blob: "SHCK" magic, u32 version, u32 entry count, then
/// per entry (u32 name length, name, u32 ndim, i64 dims, f64 data),
/// little-endian throughout. Metadata lives in a JSON sidecar next to it.
void save_blob(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_blob(const std::filesystem::path& path);

}  // namespace shearo::nn
