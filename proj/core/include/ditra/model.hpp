#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ditra/adapter.hpp"
#include "ditra/backbone.hpp"
#include "ditra/checkpoint.hpp"
#include "ditra/config.hpp"
#include "ditra/encoders.hpp"
#include "ditra/fusion.hpp"
#include "ditra/task.hpp"

namespace ditra {

struct ParamReport {
  std::size_t backbone = 0;       // frozen
  std::size_t slot_codes = 0;     // frozen
  std::size_t encoders = 0;       // frozen
  std::size_t fusion = 0;         // trainable
  std::size_t adapters = 0;       // trainable
  std::size_t scorer = 0;         // trainable (match head)
  std::size_t trainable() const { return fusion + adapters + scorer; }
  std::size_t frozen() const { return backbone + slot_codes + encoders; }
  std::size_t total() const { return trainable() + frozen(); }
  double trainable_ratio() const {
    return total() ? double(trainable()) / double(total()) : 0.0;
  }
};

// Full system: frozen encoders -> fusion -> frozen backbone with gated
// adapters, plus the bilinear image-text match scorer. Trainables are the
// fusion block, the adapter stack and the scorer.
class Model {
 public:
  Model(const RunConfig& cfg, const SynthTask& task);

  Backbone& backbone() { return *backbone_; }
  const Backbone& backbone() const { return *backbone_; }
  const VisionEncoders& encoders() const { return *encoders_; }
  const Fusion& fusion() const { return *fusion_; }
  const AdapterStack& adapters() const { return *adapters_; }
  const Tensor& match_matrix() const { return itm_; }
  const RunConfig& config() const { return cfg_; }

  Tensor fuse(const Image& img) const;
  AdapterHook hook(const Tensor& fused, Rng* gate_rng) const;

  // greedy decode of one image; emits task tokens only
  std::vector<int> translate(const Image& img, Rng* gate_rng) const;

  // bilinear match score between pooled fused rows and pooled text rows
  Tensor match_score(const Tensor& fused, const std::vector<int>& text) const;

  std::vector<Tensor> trainable_params() const;
  std::vector<std::pair<std::string, Tensor>> named_trainable() const;
  ParamReport param_report() const;

  Checkpoint to_checkpoint(const std::string& config_text) const;
  // rebuilds deterministic parts from cfg, loads stored tensors, verifies
  // the frozen-group digests, freezes the backbone
  void load_from(const Checkpoint& ck);

 private:
  RunConfig cfg_;
  std::unique_ptr<VisionEncoders> encoders_;
  std::unique_ptr<Backbone> backbone_;
  std::unique_ptr<Fusion> fusion_;
  std::unique_ptr<AdapterStack> adapters_;
  Tensor itm_;
};

// loads only the backbone tensors of a pretraining checkpoint into `bb`,
// verifying the stored digest
void load_backbone(Backbone& bb, const Checkpoint& ck);
Checkpoint backbone_checkpoint(const Backbone& bb,
                               const std::string& config_text);

}  // namespace ditra
