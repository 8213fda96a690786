#include "ditra/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "ditra/error.hpp"
#include "ditra/optim.hpp"

namespace ditra {

namespace {
constexpr double kInitStd = 0.02;

Tensor gauss_param(int rows, int cols, Rng& rng) {
  return Tensor::gaussian({rows, cols}, rng, kInitStd).set_requires_grad(true);
}

Tensor fill_row(int cols, double v) {
  return Tensor({1, cols}, v).set_requires_grad(true);
}

std::vector<std::uint8_t> causal_allow(int n) {
  std::vector<std::uint8_t> allow(static_cast<std::size_t>(n) *
                                  static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j)
      allow[std::size_t(i) * n + j] = 1;
  return allow;
}

double unbiased_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / double(v.size() - 1));
}
}  // namespace

// -------------------------------------------------------- token formats

std::pair<std::vector<int>, int> seq_translate(const std::vector<int>& tgt,
                                               const VocabLayout& vl) {
  std::vector<int> toks;
  toks.reserve(tgt.size() + 2);
  toks.push_back(vl.bos());
  toks.insert(toks.end(), tgt.begin(), tgt.end());
  toks.push_back(vl.eos());
  return {std::move(toks), 0};
}

std::pair<std::vector<int>, int> seq_transcribe(const std::vector<int>& src,
                                                Domain d,
                                                const VocabLayout& vl) {
  std::vector<int> toks;
  toks.reserve(src.size() + 2);
  toks.push_back(vl.tag(d));
  toks.insert(toks.end(), src.begin(), src.end());
  toks.push_back(vl.eos());
  return {std::move(toks), 0};
}

std::pair<std::vector<int>, int> seq_text_translate(
    const std::vector<int>& src, Domain d, const std::vector<int>& tgt,
    const VocabLayout& vl) {
  std::vector<int> toks;
  toks.reserve(src.size() + tgt.size() + 4);
  toks.push_back(vl.ttl());
  toks.push_back(vl.tag(d));
  toks.insert(toks.end(), src.begin(), src.end());
  toks.push_back(vl.bos());
  toks.insert(toks.end(), tgt.begin(), tgt.end());
  toks.push_back(vl.eos());
  return {std::move(toks), 2 + int(src.size())};
}

// ------------------------------------------------------------- Backbone

Backbone::Backbone(BackboneConfig cfg) : cfg_(cfg) {
  if (cfg_.d_llm <= 0 || cfg_.n_layers <= 0 || cfg_.d_ffn <= 0)
    throw ConfigError("backbone dimensions must be positive");
  if (cfg_.d_llm % cfg_.n_heads != 0)
    throw ConfigError("backbone width must be a multiple of heads");

  Rng rng(cfg_.init_seed);
  emb_ = gauss_param(cfg_.vocab.size(), cfg_.d_llm, rng);
  pos_ = gauss_param(cfg_.max_pos, cfg_.d_llm, rng);
  blocks_.reserve(static_cast<std::size_t>(cfg_.n_layers));
  for (int l = 0; l < cfg_.n_layers; ++l) {
    Block b;
    b.ln1_g = fill_row(cfg_.d_llm, 1.0);
    b.ln1_b = fill_row(cfg_.d_llm, 0.0);
    b.att = MultiHeadAttention(cfg_.d_llm, cfg_.n_heads, rng);
    b.ln2_g = fill_row(cfg_.d_llm, 1.0);
    b.ln2_b = fill_row(cfg_.d_llm, 0.0);
    b.fc1_w = gauss_param(cfg_.d_llm, cfg_.d_ffn, rng);
    b.fc1_b = fill_row(cfg_.d_ffn, 0.0);
    b.fc2_w = gauss_param(cfg_.d_ffn, cfg_.d_llm, rng);
    b.fc2_b = fill_row(cfg_.d_llm, 0.0);
    blocks_.push_back(std::move(b));
  }
  lnf_g_ = fill_row(cfg_.d_llm, 1.0);
  lnf_b_ = fill_row(cfg_.d_llm, 0.0);

  Rng slot_rng(cfg_.slot_seed);
  slot_codes_ =
      Tensor::gaussian({cfg_.n_slots, cfg_.d_llm}, slot_rng, cfg_.slot_std);
}

Tensor Backbone::embed_rows(const std::vector<int>& ids) const {
  return embedding_lookup(emb_, ids);
}

Tensor Backbone::forward_text_hidden(const Tensor* prefix,
                                     const std::vector<int>& text,
                                     const AdapterHook* hook) const {
  const int t = int(text.size());
  if (t <= 0) throw ShapeError("forward needs at least one text token");
  if (t > cfg_.max_pos)
    throw ShapeError("text length exceeds positional capacity");
  Tensor x = add(embed_rows(text), row_slice(pos_, 0, t));
  int p = 0;
  if (prefix) {
    if (prefix->cols() != cfg_.d_llm)
      throw ShapeError("prefix width must match backbone width");
    p = prefix->rows();
    x = concat_rows({*prefix, x});
  }
  const int n = p + t;
  const auto allow = causal_allow(n);
  for (int l = 0; l < cfg_.n_layers; ++l) {
    const Block& b = blocks_[static_cast<std::size_t>(l)];
    Tensor h = layer_norm(x, b.ln1_g, b.ln1_b);
    x = add(x, b.att.forward(h, h, &allow));
    Tensor f = add_rowvec(
        matmul(relu(add_rowvec(matmul(layer_norm(x, b.ln2_g, b.ln2_b), b.fc1_w),
                               b.fc1_b)),
               b.fc2_w),
        b.fc2_b);
    if (hook && *hook) f = (*hook)(f, l);
    x = add(x, f);
  }
  x = layer_norm(x, lnf_g_, lnf_b_);
  return p > 0 ? row_slice(x, p, n) : x;
}

Tensor Backbone::forward_logits(const Tensor* prefix,
                                const std::vector<int>& text,
                                const AdapterHook* hook) const {
  return matmul_nt(forward_text_hidden(prefix, text, hook), emb_);
}

Tensor Backbone::sequence_loss_sum(const Tensor* prefix,
                                   const std::vector<int>& text, int first,
                                   int* n_scored,
                                   const AdapterHook* hook) const {
  Tensor logits = forward_logits(prefix, text, hook);
  const int t = int(text.size());
  std::vector<int> targets(static_cast<std::size_t>(t), -1);
  int count = 0;
  for (int i = std::max(first, 0); i + 1 < t; ++i) {
    targets[static_cast<std::size_t>(i)] = text[static_cast<std::size_t>(i) + 1];
    ++count;
  }
  if (count == 0) throw ShapeError("sequence has no scored positions");
  if (n_scored) *n_scored = count;
  Tensor mean = cross_entropy_logits(logits, targets);
  return scale(mean, double(count));
}

Tensor Backbone::sequence_loss(const Tensor* prefix,
                               const std::vector<int>& text, int first,
                               const AdapterHook* hook) const {
  int n = 0;
  Tensor s = sequence_loss_sum(prefix, text, first, &n, hook);
  return scale(s, 1.0 / double(n));
}

double Backbone::sequence_accuracy(const Tensor* prefix,
                                   const std::vector<int>& text,
                                   int first) const {
  Tensor logits = forward_logits(prefix, text, nullptr);
  const int t = int(text.size());
  const int v = logits.cols();
  int ok = 0, tot = 0;
  for (int i = std::max(first, 0); i + 1 < t; ++i) {
    const double* row = logits.data() + std::size_t(i) * v;
    int best = 0;
    for (int j = 1; j < v; ++j)
      if (row[j] > row[best]) best = j;
    ok += int(best == text[static_cast<std::size_t>(i) + 1]);
    ++tot;
  }
  return tot > 0 ? double(ok) / double(tot) : 0.0;
}

std::vector<int> Backbone::generate(const Tensor& prefix, int max_new,
                                    const AdapterHook* hook) const {
  std::vector<int> text{cfg_.vocab.bos()};
  std::vector<int> out;
  for (int step = 0; step < max_new && int(text.size()) < cfg_.max_pos;
       ++step) {
    Tensor logits = forward_logits(&prefix, text, hook);
    const int v = logits.cols();
    const double* row = logits.data() + std::size_t(logits.rows() - 1) * v;
    int best = 0;
    for (int j = 1; j < v; ++j)
      if (row[j] > row[best]) best = j;
    if (best == cfg_.vocab.eos()) break;
    out.push_back(best);
    text.push_back(best);
  }
  return out;
}

Tensor Backbone::oracle_prefix(const std::vector<int>& src, Domain d,
                               double noise, Rng* rng) const {
  if (int(src.size()) > cfg_.n_slots)
    throw ShapeError("source longer than the slot grid");
  std::vector<int> ids(static_cast<std::size_t>(cfg_.n_slots),
                       cfg_.vocab.pad());
  for (std::size_t i = 0; i < src.size(); ++i) ids[i] = src[i];
  Tensor rows = embed_rows(ids);
  Tensor tag_row = embed_rows({cfg_.vocab.tag(d)});
  rows = add_rowvec(rows, tag_row);
  rows = add(rows, slot_codes_);
  if (noise > 0.0) {
    if (!rng) throw ConfigError("oracle jitter needs an rng");
    const double sig = noise * unbiased_std(emb_.values());
    Tensor jitter = Tensor::gaussian({cfg_.n_slots, cfg_.d_llm}, *rng, sig);
    rows = add(rows, jitter);
  }
  return rows;
}

// ------------------------------------------------------------ pretrain

namespace {
struct PreSample {
  std::vector<int> src;
  Domain d = Domain::A;
  std::vector<int> tgt;
};

PreSample draw_sample(const SynthTask& task, Rng& rng) {
  const TaskConfig& tc = task.config();
  PreSample s;
  const int len = tc.l_min + int(rng.next_int(tc.l_max - tc.l_min + 1));
  s.src.reserve(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) s.src.push_back(int(rng.next_int(tc.vocab)));
  s.d = rng.next_int(2) == 0 ? Domain::A : Domain::B;
  s.tgt = apply_cipher(s.src, s.d, task.cipher());
  return s;
}
}  // namespace

PretrainResult Backbone::pretrain(const SynthTask& task,
                                  const PretrainConfig& pcfg,
                                  std::ostream* log) {
  if (frozen_) throw TrainError("backbone is frozen");
  AdamWConfig oc;
  oc.lr = pcfg.lr;
  oc.warmup_frac = pcfg.warmup_frac;
  oc.total_steps = pcfg.max_steps;
  AdamW opt(all_params(), oc);
  Rng rng(pcfg.data_seed);

  std::vector<PreSample> held;
  held.reserve(static_cast<std::size_t>(pcfg.heldout));
  for (int i = 0; i < pcfg.heldout; ++i) held.push_back(draw_sample(task, rng));

  const VocabLayout& vl = cfg_.vocab;
  auto heldout_acc = [&](double* a1, double* a2, double* a3) {
    double s1 = 0, s2 = 0, s3 = 0;
    for (const PreSample& hs : held) {
      Tensor pfx = oracle_prefix(hs.src, hs.d, 0.0, nullptr);
      auto [t1, f1] = seq_translate(hs.tgt, vl);
      s1 += sequence_accuracy(&pfx, t1, f1);
      auto [t2, f2] = seq_transcribe(hs.src, hs.d, vl);
      s2 += sequence_accuracy(&pfx, t2, f2);
      auto [t3, f3] = seq_text_translate(hs.src, hs.d, hs.tgt, vl);
      s3 += sequence_accuracy(nullptr, t3, f3);
    }
    const double n = double(held.size());
    *a1 = s1 / n;
    *a2 = s2 / n;
    *a3 = s3 / n;
  };

  PretrainResult res;
  const int bsz = pcfg.batch_size;
  const int n1 = int(pcfg.mix_translate * bsz);
  const int n2 = int((pcfg.mix_translate + pcfg.mix_transcribe) * bsz);

  for (int step = 0; step < pcfg.max_steps; ++step) {
    Tape tape;
    // format-mean losses weighted by each format's share of the batch
    Tensor loss;
    int fmt_counts[3] = {0, 0, 0};
    Tensor fmt_sums[3];
    for (int b = 0; b < bsz; ++b) {
      PreSample s = draw_sample(task, rng);
      Tensor part;
      int n_scored = 0;
      int fmt;
      if (b < n1) {
        fmt = 0;
        Tensor pfx = oracle_prefix(s.src, s.d, pcfg.noise, &rng);
        auto [toks, first] = seq_translate(s.tgt, vl);
        part = sequence_loss_sum(&pfx, toks, first, &n_scored);
      } else if (b < n2) {
        fmt = 1;
        Tensor pfx = oracle_prefix(s.src, s.d, pcfg.noise, &rng);
        auto [toks, first] = seq_transcribe(s.src, s.d, vl);
        part = sequence_loss_sum(&pfx, toks, first, &n_scored);
      } else {
        fmt = 2;
        auto [toks, first] = seq_text_translate(s.src, s.d, s.tgt, vl);
        part = sequence_loss_sum(nullptr, toks, first, &n_scored);
      }
      fmt_sums[fmt] = fmt_sums[fmt].defined() ? add(fmt_sums[fmt], part)
                                              : part;
      fmt_counts[fmt] += n_scored;
    }
    int subbatch[3] = {n1, n2 - n1, bsz - n2};
    bool first_term = true;
    for (int f = 0; f < 3; ++f) {
      if (subbatch[f] == 0 || fmt_counts[f] == 0) continue;
      Tensor term = scale(fmt_sums[f],
                          double(subbatch[f]) / double(fmt_counts[f]));
      loss = first_term ? term : add(loss, term);
      first_term = false;
    }
    loss = scale(loss, 1.0 / double(bsz));
    const double loss_val = loss.item();
    GradMap grads = tape.backward(loss);
    opt.step(grads);
    res.steps = step + 1;

    const bool eval_now = (step + 1) % pcfg.eval_every == 0 ||
                          step + 1 == pcfg.max_steps;
    if (eval_now) {
      heldout_acc(&res.acc_translate, &res.acc_transcribe,
                  &res.acc_text_only);
      if (log) {
        (*log) << "pretrain step " << (step + 1) << " loss " << loss_val
               << " translate " << res.acc_translate << " transcribe "
               << res.acc_transcribe << " text " << res.acc_text_only
               << "\n";
        log->flush();
      }
      if (std::min(res.acc_translate, res.acc_text_only) >= pcfg.gate_acc) {
        res.reached_gate = true;
        break;
      }
    } else if (log && (step + 1) % pcfg.log_every == 0) {
      (*log) << "pretrain step " << (step + 1) << " loss " << loss_val
             << "\n";
      log->flush();
    }
  }

  if (!res.reached_gate &&
      std::min(res.acc_translate, res.acc_text_only) < pcfg.abort_acc) {
    throw TrainError("backbone pretraining failed to reach usable accuracy");
  }
  return res;
}

// --------------------------------------------------------- bookkeeping

void Backbone::freeze() {
  for (Tensor& t : all_params()) t.set_requires_grad(false);
  frozen_ = true;
}

Digest Backbone::content_hash() const {
  std::vector<Tensor> ts = all_params();
  ts.push_back(slot_codes_);
  return sha256_tensors(ts);
}

std::vector<std::pair<std::string, Tensor>> Backbone::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("backbone.emb", emb_);
  out.emplace_back("backbone.pos", pos_);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const Block& b = blocks_[l];
    const std::string p = "backbone.block" + std::to_string(l);
    out.emplace_back(p + ".ln1_g", b.ln1_g);
    out.emplace_back(p + ".ln1_b", b.ln1_b);
    b.att.collect(p + ".att", out);
    out.emplace_back(p + ".ln2_g", b.ln2_g);
    out.emplace_back(p + ".ln2_b", b.ln2_b);
    out.emplace_back(p + ".fc1_w", b.fc1_w);
    out.emplace_back(p + ".fc1_b", b.fc1_b);
    out.emplace_back(p + ".fc2_w", b.fc2_w);
    out.emplace_back(p + ".fc2_b", b.fc2_b);
  }
  out.emplace_back("backbone.lnf_g", lnf_g_);
  out.emplace_back("backbone.lnf_b", lnf_b_);
  return out;
}

std::vector<Tensor> Backbone::all_params() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

std::size_t Backbone::param_count() const {
  std::size_t n = 0;
  for (auto& [name, t] : named_params()) n += t.size();
  return n;
}

}  // namespace ditra
