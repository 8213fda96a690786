#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ditra/tensor.hpp"

namespace ditra {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256_bytes(const void* data, std::size_t n);

// Digest over a parameter group: per tensor, rank and extents (u32 LE) then
// the raw float64 payload. Order-sensitive by design — a frozen group is a
// fixed, ordered list.
Digest sha256_tensors(const std::vector<Tensor>& ts);

std::string hex_digest(const Digest& d);

}  // namespace ditra
