#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nrl/model.hpp"

namespace nrl {

// Versioned binary container: magic string, format version, config echo,
// named little-endian double arrays with shapes. Round-trips bit-exactly.
std::vector<std::uint8_t> serialize_checkpoint(const Encoder& enc);
void deserialize_checkpoint(std::span<const std::uint8_t> bytes, Encoder& enc);

void save_checkpoint(const std::string& path, const Encoder& enc);
void load_checkpoint(const std::string& path, Encoder& enc);

}  // namespace nrl
