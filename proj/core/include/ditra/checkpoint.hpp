#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ditra/hash.hpp"
#include "ditra/tensor.hpp"

namespace ditra {

// On-disk snapshot: named tensors, the config text that produced them, and
// content digests of the frozen parameter groups so a loader can prove the
// frozen parts were not tampered with or mixed across runs.
//
// Layout (all integers little-endian):
//   "VWT1"
//   u32 tensor count
//   per tensor: u16 name length, name bytes, u8 rank, rank x u32 extents,
//               extent-product x f64 payload
//   u32 config text length, config bytes
//   u32 digest count
//   per digest: u16 name length, name bytes, 32 digest bytes
struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::string config_text;
  std::vector<std::pair<std::string, Digest>> frozen_hashes;

  const Tensor* find(const std::string& name) const;
  const Digest* find_hash(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// throws CheckpointError(hash_mismatch) unless actual matches the stored
// digest named `group`
void verify_frozen_hash(const Checkpoint& ck, const std::string& group,
                        const Digest& actual);

}  // namespace ditra
