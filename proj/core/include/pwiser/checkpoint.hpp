#pragma once

#include <string>

#include "pwiser/nn.hpp"

namespace pwiser {

// Binary checkpoint: magic "PWSR", u32 LE version, then per tensor (sorted
// by name): u32 LE name length, UTF-8 name, u32 LE rank, u64 LE dims,
// raw 64-bit LE floats row-major.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParamStore& ps, const std::string& path);
ParamStore load_checkpoint(const std::string& path);

}  // namespace pwiser
