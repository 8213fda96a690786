#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ditra/fusion.hpp"
#include "ditra/hash.hpp"
#include "ditra/rng.hpp"
#include "ditra/task.hpp"
#include "ditra/tensor.hpp"
#include "ditra/vocab.hpp"

namespace ditra {

struct BackboneConfig {
  int d_llm = 64;
  int n_layers = 4;
  int n_heads = 4;
  int d_ffn = 256;
  int max_pos = 24;
  int n_slots = 16;  // visual/oracle prefix length
  VocabLayout vocab{};
  std::uint64_t init_seed = 0xB0B0;
  std::uint64_t slot_seed = 0x534C4F54;
  double slot_std = 0.1;
};

struct PretrainConfig {
  int max_steps = 8000;
  int batch_size = 32;
  double lr = 1e-3;
  double warmup_frac = 0.08;
  // batch shares per sequence format; remainder is text-only translation
  double mix_translate = 0.35;
  double mix_transcribe = 0.20;
  double noise = 0.5;      // oracle row jitter in units of embedding std
  double gate_acc = 0.995; // held-out accuracy needed to stop early
  double abort_acc = 0.80; // minimum acceptable accuracy at the step cap
  int heldout = 150;
  int eval_every = 250;
  int log_every = 250;
  std::uint64_t data_seed = 99;
};

struct PretrainResult {
  int steps = 0;
  // held-out next-token accuracy per sequence format
  double acc_translate = 0.0;
  double acc_transcribe = 0.0;
  double acc_text_only = 0.0;
  bool reached_gate = false;
};

// Transforms the FFN output of one decoder layer before its residual add.
using AdapterHook = std::function<Tensor(const Tensor&, int layer)>;

// Token-sequence builders shared by pretraining, the staged trainer and
// evaluation. Each returns (tokens, first): `first` is the text index whose
// SUCCESSOR is the first token scored by the loss.
std::pair<std::vector<int>, int> seq_translate(const std::vector<int>& tgt,
                                               const VocabLayout& vl);
std::pair<std::vector<int>, int> seq_transcribe(const std::vector<int>& src,
                                                Domain d, const VocabLayout& vl);
std::pair<std::vector<int>, int> seq_text_translate(const std::vector<int>& src,
                                                    Domain d,
                                                    const std::vector<int>& tgt,
                                                    const VocabLayout& vl);

// Frozen decoder-only transformer. Pre-LN blocks, learned text positional
// embeddings, tied input/output embeddings. A forward pass takes an optional
// prefix of embedding-width rows that is placed before the text tokens;
// prefix rows get no positional embeddings and text positions restart at 0.
class Backbone {
 public:
  explicit Backbone(BackboneConfig cfg);

  const BackboneConfig& config() const { return cfg_; }
  const Tensor& embeddings() const { return emb_; }
  const Tensor& slot_codes() const { return slot_codes_; }

  // hidden states for text rows only (prefix rows are consumed internally)
  Tensor forward_text_hidden(const Tensor* prefix,
                             const std::vector<int>& text,
                             const AdapterHook* hook = nullptr) const;
  // tied-head logits over the effective vocabulary, text rows only
  Tensor forward_logits(const Tensor* prefix, const std::vector<int>& text,
                        const AdapterHook* hook = nullptr) const;

  // mean cross-entropy of predicting text[first+1..] (teacher-forced); also
  // exposes the summed form for exact batch-level averaging
  Tensor sequence_loss(const Tensor* prefix, const std::vector<int>& text,
                       int first, const AdapterHook* hook = nullptr) const;
  Tensor sequence_loss_sum(const Tensor* prefix, const std::vector<int>& text,
                           int first, int* n_scored,
                           const AdapterHook* hook = nullptr) const;
  // fraction of scored positions predicted correctly (greedy, no tape)
  double sequence_accuracy(const Tensor* prefix, const std::vector<int>& text,
                           int first) const;

  // greedy decode starting from [prefix, BOS]; emits until EOS or cap,
  // returning emitted tokens without the terminator; ties resolve to the
  // lowest token id
  std::vector<int> generate(const Tensor& prefix, int max_new,
                            const AdapterHook* hook = nullptr) const;

  // oracle prefix rows for pretraining: emb[s_i] + emb[tag] + slot_code_i
  // per slot (PAD embedding where the slot is empty), optionally jittered
  // with Gaussian noise scaled by the embedding table's std
  Tensor oracle_prefix(const std::vector<int>& src, Domain d, double noise,
                       Rng* rng) const;

  PretrainResult pretrain(const SynthTask& task, const PretrainConfig& pcfg,
                          std::ostream* log = nullptr);

  void freeze();
  bool frozen() const { return frozen_; }
  Digest content_hash() const;

  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<Tensor> all_params() const;
  std::size_t param_count() const;

 private:
  struct Block {
    Tensor ln1_g, ln1_b, ln2_g, ln2_b;
    MultiHeadAttention att;
    Tensor fc1_w, fc1_b, fc2_w, fc2_b;
  };

  Tensor embed_rows(const std::vector<int>& ids) const;

  BackboneConfig cfg_;
  Tensor emb_, pos_;
  std::vector<Block> blocks_;
  Tensor lnf_g_, lnf_b_;
  Tensor slot_codes_;  // fixed, not part of named_params
  bool frozen_ = false;
};

}  // namespace ditra
