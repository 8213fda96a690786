#pragma once

#include <cstdint>
#include <vector>

#include "ditra/hash.hpp"
#include "ditra/task.hpp"
#include "ditra/tensor.hpp"

namespace ditra {

struct EncoderConfig {
  int d_sem = 16;
  int d_det = 24;
  double slot_code_std = 0.5;
  std::uint64_t seed = 1234;
};

// Two frozen random-projection encoders over the same patch grid. The
// semantic stream sees 4x4 box-pooled patch values plus the global band mean
// (low-pass; glyph-blind at the default glyph table) through one shared
// projection, plus a fixed random per-slot code added to each row — patch
// order lives in the features themselves. The detail stream sees mean-removed
// raw patch pixels (high-pass; band-blind, slot-blind) through its own shared
// projection, so its rows depend on glyph content alone.
class VisionEncoders {
 public:
  VisionEncoders(const TaskConfig& task, EncoderConfig cfg);

  Tensor encode_semantic(const Image& img) const;  // n_patches x d_sem
  Tensor encode_detail(const Image& img) const;    // n_patches x d_det

  int n_patches() const { return task_.n_patches(); }
  const EncoderConfig& config() const { return cfg_; }

  // content hash over semantic projection, detail projection, slot codes
  Digest content_hash() const;
  std::vector<Tensor> all_params() const;

 private:
  void check_geometry(const Image& img) const;

  TaskConfig task_;
  EncoderConfig cfg_;
  Tensor w_sem_;       // ((patch/4)^2 + 1) x d_sem
  Tensor w_det_;       // patch^2 x d_det
  Tensor slot_codes_;  // n_patches x d_sem
};

}  // namespace ditra
