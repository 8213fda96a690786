#include "ditra/fusion.hpp"

#include <cmath>

#include "ditra/error.hpp"

namespace ditra {

namespace {
constexpr double kInitStd = 0.02;

Tensor weight(int rows, int cols, Rng& rng) {
  return Tensor::gaussian({rows, cols}, rng, kInitStd).set_requires_grad(true);
}

Tensor bias_row(int cols) {
  return Tensor({1, cols}).set_requires_grad(true);
}

Tensor ones_row(int cols) {
  return Tensor({1, cols}, 1.0).set_requires_grad(true);
}
}  // namespace

// ----------------------------------------------------------------- Mlp2

Mlp2::Mlp2(int in, int hidden, int out, Rng& rng)
    : w1(weight(in, hidden, rng)),
      b1(bias_row(hidden)),
      w2(weight(hidden, out, rng)),
      b2(bias_row(out)) {}

Tensor Mlp2::forward(const Tensor& x) const {
  Tensor h = relu(add_rowvec(matmul(x, w1), b1));
  return add_rowvec(matmul(h, w2), b2);
}

void Mlp2::collect(const std::string& prefix,
                   std::vector<std::pair<std::string, Tensor>>& out) const {
  out.emplace_back(prefix + ".w1", w1);
  out.emplace_back(prefix + ".b1", b1);
  out.emplace_back(prefix + ".w2", w2);
  out.emplace_back(prefix + ".b2", b2);
}

// ------------------------------------------------- MultiHeadAttention

MultiHeadAttention::MultiHeadAttention(int d_, int heads_, Rng& rng)
    : d(d_), heads(heads_) {
  if (d <= 0 || heads <= 0 || d % heads != 0)
    throw ConfigError("attention width must be a positive multiple of heads");
  wq = weight(d, d, rng);
  bq = bias_row(d);
  wk = weight(d, d, rng);
  bk = bias_row(d);
  wv = weight(d, d, rng);
  bv = bias_row(d);
  wo = weight(d, d, rng);
  bo = bias_row(d);
}

Tensor MultiHeadAttention::forward(
    const Tensor& q_in, const Tensor& kv_in,
    const std::vector<std::uint8_t>* allow) const {
  if (q_in.cols() != d || kv_in.cols() != d)
    throw ShapeError("attention input width mismatch");
  const int dk = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dk));

  Tensor q = add_rowvec(matmul(q_in, wq), bq);
  Tensor k = add_rowvec(matmul(kv_in, wk), bk);
  Tensor v = add_rowvec(matmul(kv_in, wv), bv);

  std::vector<Tensor> head_outs;
  head_outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Tensor qh = col_slice(q, h * dk, (h + 1) * dk);
    Tensor kh = col_slice(k, h * dk, (h + 1) * dk);
    Tensor vh = col_slice(v, h * dk, (h + 1) * dk);
    Tensor scores = matmul_nt(qh, kh);
    Tensor p = allow ? masked_row_softmax(scores, *allow, sc)
                     : row_softmax(scores, sc);
    head_outs.push_back(matmul(p, vh));
  }
  Tensor cat = concat_cols(head_outs);
  return add_rowvec(matmul(cat, wo), bo);
}

void MultiHeadAttention::collect(
    const std::string& prefix,
    std::vector<std::pair<std::string, Tensor>>& out) const {
  out.emplace_back(prefix + ".wq", wq);
  out.emplace_back(prefix + ".bq", bq);
  out.emplace_back(prefix + ".wk", wk);
  out.emplace_back(prefix + ".bk", bk);
  out.emplace_back(prefix + ".wv", wv);
  out.emplace_back(prefix + ".bv", bv);
  out.emplace_back(prefix + ".wo", wo);
  out.emplace_back(prefix + ".bo", bo);
}

// ----------------------------------------------------------------- enums

FusionKind fusion_kind_from_string(const std::string& s) {
  if (s == "dsam") return FusionKind::dsam;
  if (s == "concat") return FusionKind::concat;
  if (s == "sum") return FusionKind::sum;
  if (s == "interleave") return FusionKind::interleave;
  if (s == "ca_sem_to_det") return FusionKind::ca_sem_to_det;
  if (s == "ca_det_to_sem") return FusionKind::ca_det_to_sem;
  if (s == "self_attention") return FusionKind::self_attention;
  throw ConfigError("unknown fusion kind: " + s);
}

std::string to_string(FusionKind k) {
  switch (k) {
    case FusionKind::dsam: return "dsam";
    case FusionKind::concat: return "concat";
    case FusionKind::sum: return "sum";
    case FusionKind::interleave: return "interleave";
    case FusionKind::ca_sem_to_det: return "ca_sem_to_det";
    case FusionKind::ca_det_to_sem: return "ca_det_to_sem";
    case FusionKind::self_attention: return "self_attention";
  }
  return "?";
}

Streams streams_from_string(const std::string& s) {
  if (s == "both") return Streams::both;
  if (s == "semantic_only") return Streams::semantic_only;
  if (s == "detail_only") return Streams::detail_only;
  throw ConfigError("unknown streams setting: " + s);
}

std::string to_string(Streams s) {
  switch (s) {
    case Streams::both: return "both";
    case Streams::semantic_only: return "semantic_only";
    case Streams::detail_only: return "detail_only";
  }
  return "?";
}

// ----------------------------------------------------------------- Fusion

Fusion::Fusion(FusionConfig cfg, Rng& rng) : cfg_(cfg) {
  if (cfg_.d_sem <= 0 || cfg_.d_det <= 0 || cfg_.d <= 0 || cfg_.d_llm <= 0)
    throw ConfigError("fusion widths must be positive");

  if (cfg_.streams == Streams::semantic_only) {
    mlp_ = Mlp2(cfg_.d_sem, cfg_.d_mlp, cfg_.d_llm, rng);
    return;
  }
  if (cfg_.streams == Streams::detail_only) {
    mlp_ = Mlp2(cfg_.d_det, cfg_.d_mlp, cfg_.d_llm, rng);
    return;
  }

  switch (cfg_.kind) {
    case FusionKind::dsam:
      w_s_ = weight(cfg_.d_sem, cfg_.d, rng);
      w_d_ = weight(cfg_.d_det, cfg_.d, rng);
      sgdr_ = MultiHeadAttention(cfg_.d, cfg_.n_heads, rng);
      disr_ = MultiHeadAttention(cfg_.d, cfg_.n_heads, rng);
      ln_s_g_ = ones_row(cfg_.d);
      ln_s_b_ = bias_row(cfg_.d);
      ln_d_g_ = ones_row(cfg_.d);
      ln_d_b_ = bias_row(cfg_.d);
      mlp_ = Mlp2(2 * cfg_.d, cfg_.d_mlp, cfg_.d_llm, rng);
      break;
    case FusionKind::concat:
      mlp_ = Mlp2(cfg_.d_sem + cfg_.d_det, cfg_.d_mlp, cfg_.d_llm, rng);
      break;
    case FusionKind::sum:
    case FusionKind::interleave:
      w_s_ = weight(cfg_.d_sem, cfg_.d, rng);
      w_d_ = weight(cfg_.d_det, cfg_.d, rng);
      mlp_ = Mlp2(cfg_.d, cfg_.d_mlp, cfg_.d_llm, rng);
      break;
    case FusionKind::ca_sem_to_det:
    case FusionKind::ca_det_to_sem:
      w_s_ = weight(cfg_.d_sem, cfg_.d, rng);
      w_d_ = weight(cfg_.d_det, cfg_.d, rng);
      sgdr_ = MultiHeadAttention(cfg_.d, cfg_.n_heads, rng);
      ln_s_g_ = ones_row(cfg_.d);
      ln_s_b_ = bias_row(cfg_.d);
      mlp_ = Mlp2(cfg_.d, cfg_.ca_hidden, cfg_.d_llm, rng);
      break;
    case FusionKind::self_attention:
      w_s_ = weight(cfg_.d_sem, cfg_.d, rng);
      w_d_ = weight(cfg_.d_det, cfg_.d, rng);
      self_att_ = MultiHeadAttention(2 * cfg_.d, cfg_.n_heads, rng);
      sa_ln1_g_ = ones_row(2 * cfg_.d);
      sa_ln1_b_ = bias_row(2 * cfg_.d);
      sa_ffn_ = Mlp2(2 * cfg_.d, cfg_.d_mlp, 2 * cfg_.d, rng);
      sa_ln2_g_ = ones_row(2 * cfg_.d);
      sa_ln2_b_ = bias_row(2 * cfg_.d);
      mlp_ = Mlp2(2 * cfg_.d, cfg_.d_mlp, cfg_.d_llm, rng);
      break;
  }
}

Tensor Fusion::dual_forward(const Tensor& f_sem, const Tensor& f_det) const {
  Tensor h_s = matmul(f_sem, w_s_);
  Tensor h_d = matmul(f_det, w_d_);
  // semantic-queried pass refines the detail stream; detail-queried pass
  // refines the semantic stream
  Tensor tilde_d = sgdr_.forward(h_s, h_d);
  Tensor tilde_s = disr_.forward(h_d, h_s);
  Tensor hat_s = layer_norm(add(h_s, tilde_s), ln_s_g_, ln_s_b_);
  Tensor hat_d = layer_norm(add(h_d, tilde_d), ln_d_g_, ln_d_b_);
  return mlp_.forward(concat_cols({hat_s, hat_d}));
}

Tensor Fusion::forward(const Tensor& f_sem, const Tensor& f_det) const {
  if (cfg_.streams == Streams::semantic_only) return mlp_.forward(f_sem);
  if (cfg_.streams == Streams::detail_only) return mlp_.forward(f_det);
  if (f_sem.rows() != f_det.rows())
    throw ShapeError("fusion expects matching row counts per stream");

  switch (cfg_.kind) {
    case FusionKind::dsam:
      return dual_forward(f_sem, f_det);
    case FusionKind::concat:
      return mlp_.forward(concat_cols({f_sem, f_det}));
    case FusionKind::sum:
      return mlp_.forward(add(matmul(f_sem, w_s_), matmul(f_det, w_d_)));
    case FusionKind::interleave:
      return mlp_.forward(
          interleave_rows(matmul(f_sem, w_s_), matmul(f_det, w_d_)));
    case FusionKind::ca_sem_to_det: {
      Tensor h_s = matmul(f_sem, w_s_);
      Tensor h_d = matmul(f_det, w_d_);
      Tensor att = sgdr_.forward(h_s, h_d);
      Tensor hat = layer_norm(add(h_d, att), ln_s_g_, ln_s_b_);
      return mlp_.forward(hat);
    }
    case FusionKind::ca_det_to_sem: {
      Tensor h_s = matmul(f_sem, w_s_);
      Tensor h_d = matmul(f_det, w_d_);
      Tensor att = sgdr_.forward(h_d, h_s);
      Tensor hat = layer_norm(add(h_s, att), ln_s_g_, ln_s_b_);
      return mlp_.forward(hat);
    }
    case FusionKind::self_attention: {
      Tensor x = concat_cols({matmul(f_sem, w_s_), matmul(f_det, w_d_)});
      Tensor a = self_att_.forward(x, x);
      Tensor n1 = layer_norm(add(x, a), sa_ln1_g_, sa_ln1_b_);
      Tensor f = sa_ffn_.forward(n1);
      Tensor n2 = layer_norm(add(n1, f), sa_ln2_g_, sa_ln2_b_);
      return mlp_.forward(n2);
    }
  }
  throw ConfigError("unhandled fusion kind");
}

int Fusion::out_rows(int n_patches) const {
  if (cfg_.streams == Streams::both && cfg_.kind == FusionKind::interleave)
    return 2 * n_patches;
  return n_patches;
}

std::vector<std::pair<std::string, Tensor>> Fusion::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto maybe = [&out](const char* name, const Tensor& t) {
    if (t.defined()) out.emplace_back(name, t);
  };
  maybe("fusion.w_s", w_s_);
  maybe("fusion.w_d", w_d_);
  if (sgdr_.d > 0) sgdr_.collect("fusion.sgdr", out);
  if (disr_.d > 0) disr_.collect("fusion.disr", out);
  maybe("fusion.ln_s_g", ln_s_g_);
  maybe("fusion.ln_s_b", ln_s_b_);
  maybe("fusion.ln_d_g", ln_d_g_);
  maybe("fusion.ln_d_b", ln_d_b_);
  if (self_att_.d > 0) {
    self_att_.collect("fusion.self_att", out);
    maybe("fusion.sa_ln1_g", sa_ln1_g_);
    maybe("fusion.sa_ln1_b", sa_ln1_b_);
    sa_ffn_.collect("fusion.sa_ffn", out);
    maybe("fusion.sa_ln2_g", sa_ln2_g_);
    maybe("fusion.sa_ln2_b", sa_ln2_b_);
  }
  mlp_.collect("fusion.mlp", out);
  return out;
}

std::vector<Tensor> Fusion::trainable_params() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

std::size_t Fusion::param_count() const {
  std::size_t n = 0;
  for (auto& [name, t] : named_params()) n += t.size();
  return n;
}

}  // namespace ditra
