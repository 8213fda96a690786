#include "ditra/trainer.hpp"

#include <cmath>
#include <iomanip>

#include "ditra/autograd.hpp"
#include "ditra/backbone.hpp"
#include "ditra/error.hpp"
#include "ditra/optim.hpp"

namespace ditra {

Trainer::Trainer(Model& model, const SynthTask& task, const Dataset& data,
                 RunConfig cfg)
    : model_(model),
      task_(task),
      data_(data),
      cfg_(std::move(cfg)),
      rng_(cfg_.train_seed) {
  if (data_.train.empty()) throw TrainError("empty training split");
}

void Trainer::set_metrics_stream(std::ostream* os) {
  metrics_ = os;
  wrote_header_ = false;
}

void Trainer::tsv_row(int step, int stage, const std::string& task,
                      double loss, double lr) {
  if (!metrics_) return;
  if (!wrote_header_) {
    *metrics_ << "step\tstage\ttask\tloss\tlr\n";
    // full round-trip precision so the logged loss ledger recomposes exactly
    *metrics_ << std::setprecision(17);
    wrote_header_ = true;
  }
  *metrics_ << step << '\t' << stage << '\t' << task << '\t' << loss << '\t'
            << lr << '\n';
}

StageResult Trainer::run_stage1() {
  StageResult res;
  res.steps = cfg_.stage1_steps;
  if (cfg_.stage1_steps <= 0) return res;

  AdamWConfig ocfg;
  ocfg.lr = cfg_.stage1_lr;
  ocfg.warmup_frac = cfg_.warmup_frac;
  ocfg.total_steps = cfg_.stage1_steps;
  AdamW opt(model_.trainable_params(), ocfg);

  Rng gate_rng = rng_.fork(0x51A7E);
  const Backbone& bb = model_.backbone();
  const VocabLayout& voc = bb.config().vocab;
  const int n_train = int(data_.train.size());
  const int bsz = cfg_.batch_size;

  for (int step = 1; step <= cfg_.stage1_steps; ++step) {
    std::vector<int> idx(static_cast<std::size_t>(bsz));
    for (auto& i : idx) i = rng_.next_int(n_train);

    Tape tape;
    Tensor ce_sum, mse_sum;
    int scored = 0;
    for (int i : idx) {
      const Sample& s = data_.train[size_t(i)];
      Image img = task_.render(s.source, s.domain);
      Tensor fused = model_.fuse(img);
      AdapterHook h = model_.hook(fused, &gate_rng);
      auto [toks, first] = seq_transcribe(s.source, s.domain, voc);
      int n = 0;
      Tensor part = bb.sequence_loss_sum(&fused, toks, first, &n, &h);
      scored += n;
      ce_sum = ce_sum.defined() ? add(ce_sum, part) : part;

      // pull fused rows onto the prefix encoding the backbone reads
      Tensor target = bb.oracle_prefix(s.source, s.domain, 0.0, nullptr);
      Tensor diff = add(fused, scale(target, -1.0));
      Tensor m = mean_all(mul(diff, diff));
      mse_sum = mse_sum.defined() ? add(mse_sum, m) : m;
    }
    Tensor ce = scale(ce_sum, 1.0 / double(scored));
    Tensor mse = scale(mse_sum, 1.0 / double(bsz));
    Tensor loss = cfg_.align_weight > 0.0
                      ? add(ce, scale(mse, cfg_.align_weight))
                      : ce;

    GradMap grads = tape.backward(loss);
    double lr = opt.step(grads);

    double ce_v = ce.item();
    tsv_row(step, 1, "transcribe", ce_v, lr);
    tsv_row(step, 1, "align", mse.item(), lr);
    tsv_row(step, 1, "total", loss.item(), lr);
    if (step == 1) res.first_ce = ce_v;
    if (step == 500) res.ce_500 = ce_v;
    res.final_ce = ce_v;
    res.final_loss = loss.item();
    if (log_ && (step % cfg_.log_every == 0 || step == 1))
      *log_ << "stage1 step " << step << " ce " << ce_v << " align "
            << mse.item() << " lr " << lr << "\n";
  }
  return res;
}

StageResult Trainer::run_stage2() {
  StageResult res;
  res.steps = cfg_.stage2_steps;
  if (cfg_.stage2_steps <= 0) return res;

  AdamWConfig ocfg;
  ocfg.lr = cfg_.stage2_lr;
  ocfg.warmup_frac = cfg_.warmup_frac;
  ocfg.total_steps = cfg_.stage2_steps;
  AdamW opt(model_.trainable_params(), ocfg);

  Rng gate_rng = rng_.fork(0x51A7E2);
  const Backbone& bb = model_.backbone();
  const VocabLayout& voc = bb.config().vocab;
  const int n_train = int(data_.train.size());
  const int bsz = cfg_.batch_size;
  const int mb = cfg_.itm_batch;
  const int pool_n =
      std::max(2, int(cfg_.itm_pool_frac * double(n_train)));

  for (int step = 1; step <= cfg_.stage2_steps; ++step) {
    std::vector<int> itm_idx(static_cast<std::size_t>(mb));
    std::vector<int> ttl_idx(static_cast<std::size_t>(mb));
    std::vector<int> itl_idx(static_cast<std::size_t>(bsz));
    for (auto& i : itm_idx) i = rng_.next_int(pool_n);
    for (auto& i : ttl_idx) i = rng_.next_int(n_train);
    for (auto& i : itl_idx) i = rng_.next_int(n_train);

    // text-only translation with adapters bypassed: no trainable touches it,
    // so it is evaluated off the tape and enters the ledger as a constant
    double ttl_v = 0.0;
    {
      double sum = 0.0;
      int cnt = 0;
      for (int i : ttl_idx) {
        const Sample& s = data_.train[size_t(i)];
        auto [toks, first] =
            seq_text_translate(s.source, s.domain, s.target, voc);
        int n = 0;
        Tensor part = bb.sequence_loss_sum(nullptr, toks, first, &n, nullptr);
        sum += part.item();
        cnt += n;
      }
      ttl_v = sum / double(cnt);
    }

    Tape tape;

    // match scoring over the alignment pool; negatives pair each image
    // with the previous sample's text (wrap-around)
    std::vector<Tensor> fused_pool;
    fused_pool.reserve(size_t(mb));
    for (int i : itm_idx)
      fused_pool.push_back(model_.fuse(
          task_.render(data_.train[size_t(i)].source,
                       data_.train[size_t(i)].domain)));
    std::vector<Tensor> pos, neg;
    for (int b = 0; b < mb; ++b) {
      const Sample& sp = data_.train[size_t(itm_idx[size_t(b)])];
      const Sample& sn =
          data_.train[size_t(itm_idx[size_t((b - 1 + mb) % mb)])];
      pos.push_back(model_.match_score(fused_pool[size_t(b)], sp.source));
      neg.push_back(model_.match_score(fused_pool[size_t(b)], sn.source));
    }
    Tensor pos_scores = concat_rows(pos);
    Tensor neg_scores = concat_rows(neg);
    std::vector<double> ones(size_t(mb), 1.0), zeros(size_t(mb), 0.0);
    Tensor l_itm = scale(add(bce_with_logits(pos_scores, ones),
                             bce_with_logits(neg_scores, zeros)),
                         0.5);

    // image-conditioned translation
    Tensor itl_sum;
    int itl_cnt = 0;
    for (int i : itl_idx) {
      const Sample& s = data_.train[size_t(i)];
      Tensor fused = model_.fuse(task_.render(s.source, s.domain));
      AdapterHook h = model_.hook(fused, &gate_rng);
      auto [toks, first] = seq_translate(s.target, voc);
      int n = 0;
      Tensor part = bb.sequence_loss_sum(&fused, toks, first, &n, &h);
      itl_cnt += n;
      itl_sum = itl_sum.defined() ? add(itl_sum, part) : part;
    }
    Tensor l_itl = scale(itl_sum, 1.0 / double(itl_cnt));

    Tensor tape_loss =
        add(scale(l_itm, cfg_.lambda_itm), scale(l_itl, cfg_.lambda_itl));
    GradMap grads = tape.backward(tape_loss);
    double lr = opt.step(grads);

    double itm_v = l_itm.item();
    double itl_v = l_itl.item();
    double total = cfg_.lambda_itm * itm_v + cfg_.lambda_ttl * ttl_v +
                   cfg_.lambda_itl * itl_v;
    tsv_row(step, 2, "itm", itm_v, lr);
    tsv_row(step, 2, "ttl", ttl_v, lr);
    tsv_row(step, 2, "itl", itl_v, lr);
    tsv_row(step, 2, "total", total, lr);
    if (step == 1) res.first_ce = itl_v;
    if (step == 500) res.ce_500 = itl_v;
    res.final_ce = itl_v;
    res.final_loss = total;
    if (log_ && (step % cfg_.log_every == 0 || step == 1))
      *log_ << "stage2 step " << step << " itm " << itm_v << " ttl " << ttl_v
            << " itl " << itl_v << " total " << total << " lr " << lr << "\n";
  }
  return res;
}

EvalResult Trainer::score_outputs(const std::vector<TokenSeq>& hyps,
                                  const std::vector<TokenSeq>& refs) {
  EvalResult r;
  r.n = int(hyps.size());
  r.bleu = corpus_bleu(hyps, refs);
  r.cer = corpus_cer(hyps, refs);
  r.token_acc = token_accuracy(hyps, refs);
  r.exact = exact_match(hyps, refs);
  r.numeric = numeric_accuracy(hyps, refs);
  return r;
}

EvalResult Trainer::eval_internal(const NoiseSpec* spec, int n) {
  if (data_.test.empty()) throw TrainError("empty test split");
  int m = std::min<int>(n, int(data_.test.size()));
  Rng gate_rng = Rng(cfg_.train_seed).fork(0xE7A1);  // call-order independent
  std::vector<TokenSeq> hyps, refs;
  hyps.reserve(size_t(m));
  refs.reserve(size_t(m));
  for (int i = 0; i < m; ++i) {
    const Sample& s = data_.test[size_t(i)];
    Image img = task_.render(s.source, s.domain);
    if (spec) {
      NoiseSpec per = *spec;
      per.seed = spec->seed + std::uint64_t(i) * 0x9E3779B97F4A7C15ull;
      img = inject_noise(img, per);
    }
    hyps.push_back(model_.translate(img, &gate_rng));
    refs.push_back(s.target);
  }
  return score_outputs(hyps, refs);
}

EvalResult Trainer::evaluate(int n) { return eval_internal(nullptr, n); }

EvalResult Trainer::evaluate_noisy(const NoiseSpec& spec, int n) {
  return eval_internal(&spec, n);
}

}  // namespace ditra
