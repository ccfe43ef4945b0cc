#pragma once

#include <map>
#include <string>
#include <vector>

#include "voxelpipe/layers.hpp"
#include "voxelpipe/tensor.hpp"

namespace voxelpipe {

// Versioned flat binary weight file: header (magic, version, entry count),
// then per entry: name, shape, fp32 payload. Round-trips bit-exactly; a
// truncated or corrupted file raises IoError naming the byte offset.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& entries);

std::map<std::string, Tensor> load_checkpoint(const std::string& path);

// Convenience bridges for a parameter registry.
std::vector<std::pair<std::string, const Tensor*>> checkpoint_entries(
    const std::vector<NamedParam<float>>& params);

// Copies values into the registry; shape or name mismatches raise
// InvariantError. Entries in `loaded` not named by `params` are ignored when
// `allow_extra`, otherwise rejected.
void apply_checkpoint(const std::map<std::string, Tensor>& loaded,
                      const std::vector<NamedParam<float>>& params, bool allow_extra = true);

}  // namespace voxelpipe
