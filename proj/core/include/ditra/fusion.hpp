#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ditra/autograd.hpp"
#include "ditra/rng.hpp"
#include "ditra/tensor.hpp"

namespace ditra {

// ------------------------------------------------------------ shared blocks

// linear -> ReLU -> linear
struct Mlp2 {
  Tensor w1, b1, w2, b2;

  Mlp2() = default;
  Mlp2(int in, int hidden, int out, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix,
               std::vector<std::pair<std::string, Tensor>>& out) const;
};

struct MultiHeadAttention {
  int d = 0, heads = 0;
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;

  MultiHeadAttention() = default;
  MultiHeadAttention(int d, int heads, Rng& rng);

  // q_in: n x d, kv_in: m x d; allow (optional): n*m row-major mask, entries
  // with 0 are excluded from the softmax entirely
  Tensor forward(const Tensor& q_in, const Tensor& kv_in,
                 const std::vector<std::uint8_t>* allow = nullptr) const;
  void collect(const std::string& prefix,
               std::vector<std::pair<std::string, Tensor>>& out) const;
};

// ----------------------------------------------------------------- fusion

enum class FusionKind {
  dsam,
  concat,
  sum,
  interleave,
  ca_sem_to_det,
  ca_det_to_sem,
  self_attention,
};

enum class Streams { both, semantic_only, detail_only };

FusionKind fusion_kind_from_string(const std::string& s);
std::string to_string(FusionKind k);
Streams streams_from_string(const std::string& s);
std::string to_string(Streams s);

struct FusionConfig {
  FusionKind kind = FusionKind::dsam;
  Streams streams = Streams::both;
  int d_sem = 16;
  int d_det = 24;
  int d = 32;       // shared cross-attention width
  int n_heads = 4;
  int d_mlp = 64;
  int d_llm = 64;
  int ca_hidden = 129;  // sized so one-way CA matches the dual path within 5%
};

// Fuses the two encoder streams into backbone-width rows. The dual-stream
// path projects both streams to a shared width, cross-attends in both
// directions (semantic-queried refinement of detail, detail-queried
// refinement of semantics), applies residual+LayerNorm per stream, and fuses
// by concat+MLP. Baseline strategies replace that pipeline wholesale; a
// single-stream setting routes one encoder through a plain MLP.
class Fusion {
 public:
  Fusion(FusionConfig cfg, Rng& rng);

  Tensor forward(const Tensor& f_sem, const Tensor& f_det) const;

  int out_rows(int n_patches) const;
  const FusionConfig& config() const { return cfg_; }
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<Tensor> trainable_params() const;
  std::size_t param_count() const;

 private:
  Tensor dual_forward(const Tensor& f_sem, const Tensor& f_det) const;

  FusionConfig cfg_;

  // dual-stream path and projection-based baselines
  Tensor w_s_, w_d_;  // stream projections, no bias
  MultiHeadAttention sgdr_, disr_;
  Tensor ln_s_g_, ln_s_b_, ln_d_g_, ln_d_b_;
  Mlp2 mlp_;

  // self_attention baseline extras (encoder layer at width 2*d)
  MultiHeadAttention self_att_;
  Tensor sa_ln1_g_, sa_ln1_b_, sa_ln2_g_, sa_ln2_b_;
  Mlp2 sa_ffn_;
};

}  // namespace ditra
