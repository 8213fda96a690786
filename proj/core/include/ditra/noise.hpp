#pragma once

#include <cstdint>

#include "ditra/task.hpp"

namespace ditra {

struct NoiseSpec {
  enum class Kind { none, blur, occlusion, downsample, quantize, mixed };
  Kind kind = Kind::none;
  double sigma = 2.0;      // blur
  double fraction = 0.15;  // occlusion area fraction, in (0,1)
  std::uint64_t seed = 0;  // occlusion placement
  int factor = 2;          // downsample block size
  int levels = 6;          // quantization levels
};

NoiseSpec::Kind noise_kind_from_string(const std::string& s);
std::string to_string(NoiseSpec::Kind k);

// Pure; output pixels stay in [0,1]. mixed = blur, occlusion, downsample,
// quantize in that order.
Image inject_noise(const Image& img, const NoiseSpec& spec);

}  // namespace ditra
