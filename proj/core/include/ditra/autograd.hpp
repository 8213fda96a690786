#pragma once

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "ditra/tensor.hpp"

namespace ditra {

class Tape;

// Gradients keyed by parameter identity (shared storage pointer).
class GradMap {
 public:
  // gradient for this parameter; zeros of matching shape if it never
  // participated in the loss
  Tensor of(const Tensor& param) const;
  bool has(const Tensor& param) const;
  std::size_t size() const { return g_.size(); }

 private:
  friend class Tape;
  std::unordered_map<const TensorData*, Tensor> g_;
};

// Wengert list. Ops append nodes in creation order, which is already a
// topological order, so one reverse sweep visits each node exactly once.
// A Tape installs itself as the thread's active tape for its lifetime;
// with no active tape, ops run untracked (inference fast path).
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  // called by primitives ----------------------------------------------
  // Node id of t on this tape; registers a leaf if t requires grad and is
  // untracked. Returns -1 for constants (no gradient wanted).
  int source_node(const Tensor& t);
  int record(std::size_t out_size,
             std::function<void(const double*, Tape&)> backward);
  void attach(const Tensor& out, int node) const;
  // gradient buffer of a node, allocated on first touch
  double* grad(int node);

  // user API -----------------------------------------------------------
  GradMap backward(const Tensor& loss);
  std::size_t n_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    std::size_t out_size;
    std::function<void(const double* gout, Tape&)> backward;  // null for leaves
  };

  std::uint64_t gen_;
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  std::vector<Tensor> leaves_;  // keeps leaf storage alive; parallel to node ids
  std::vector<int> leaf_node_ids_;
  Tape* prev_ = nullptr;
  bool used_ = false;
};

// --------------------------------------------------------------------------
// primitives (all run untracked when no input is on a tape)
// --------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]x[k,n] -> [m,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);  // same shape
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
Tensor add_rowvec(const Tensor& x, const Tensor& b);  // [m,n] + [1,n]
Tensor mul_rowvec(const Tensor& x, const Tensor& g);  // [m,n] * [1,n]
Tensor repeat_rows(const Tensor& row, int n);         // [1,n] -> [m,n]

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// softmax over each row of (scale * x); scale carries the 1/sqrt(d_k)
// attention factor
Tensor row_softmax(const Tensor& x, double scale = 1.0);
// entries with allow==0 are excluded from the softmax entirely (output 0),
// which keeps masked positions bit-exactly uninfluential
Tensor masked_row_softmax(const Tensor& x, const std::vector<std::uint8_t>& allow,
                          double scale = 1.0);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

Tensor concat_cols(const std::vector<Tensor>& xs);
Tensor concat_rows(const std::vector<Tensor>& xs);
Tensor interleave_rows(const Tensor& a, const Tensor& b);  // -> [2m,n]
Tensor row_slice(const Tensor& x, int r0, int r1);
Tensor col_slice(const Tensor& x, int c0, int c1);
Tensor row_mean(const Tensor& x);  // -> [1,n]
Tensor mean_all(const Tensor& x);  // -> scalar

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);

// mean cross-entropy from raw logits; target -1 skips the row
Tensor cross_entropy_logits(const Tensor& logits, const std::vector<int>& targets);
// mean binary cross-entropy from raw scores
Tensor bce_with_logits(const Tensor& scores, const std::vector<double>& labels);

namespace detail {
// raw kernels, also used by backward passes. c = a*b variants; accum adds.
void mm_ab(const double* a, const double* b, double* c, int m, int k, int n,
           bool accum);
void mm_abt(const double* a, const double* b, double* c, int m, int k, int n,
            bool accum);  // c[m,n] = a[m,k] * b[n,k]^T
void mm_atb(const double* a, const double* b, double* c, int m, int k, int n,
            bool accum);  // c[k,n] = a[m,k]^T * b[m,n]
}  // namespace detail

}  // namespace ditra
