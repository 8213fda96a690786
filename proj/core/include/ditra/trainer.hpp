#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "ditra/config.hpp"
#include "ditra/metrics.hpp"
#include "ditra/model.hpp"
#include "ditra/noise.hpp"
#include "ditra/task.hpp"

namespace ditra {

struct EvalResult {
  int n = 0;
  double bleu = 0.0;        // [0, 100]
  double cer = 0.0;
  double token_acc = 0.0;
  double exact = 0.0;
  NumericAccuracy numeric{};
};

struct StageResult {
  int steps = 0;
  double first_ce = 0.0;  // step-1 headline cross-entropy
  double ce_500 = 0.0;    // headline cross-entropy at step 500 (0 if shorter)
  double final_ce = 0.0;
  double final_loss = 0.0;
};

// Two-stage trainer over a built model and a fixed dataset split.
//
// Stage 1 (modality alignment): only fusion + adapters + scorer train, at a
// high learning rate. The backbone transcribes the source sequence from the
// fused visual prefix (cross-entropy), with an auxiliary mean-squared pull
// of the fused rows toward the prefix rows the backbone was pretrained on —
// the transcription loss alone is badly under-determined and settles on
// prefix encodings the translation pathway cannot read.
//
// Stage 2 (multi-task): match scoring (in-batch rolled negatives), a
// text-only translation loss with adapters bypassed (constant with respect
// to every trainable, recorded for the loss ledger), and image-conditioned
// translation, combined with fixed weights at a low learning rate.
class Trainer {
 public:
  Trainer(Model& model, const SynthTask& task, const Dataset& data,
          RunConfig cfg);

  void set_metrics_stream(std::ostream* os);  // TSV rows
  void set_log_stream(std::ostream* os) { log_ = os; }

  StageResult run_stage1();
  StageResult run_stage2();

  EvalResult evaluate(int n);  // greedy decode over the test split
  EvalResult evaluate_noisy(const NoiseSpec& spec, int n);

  static EvalResult score_outputs(const std::vector<TokenSeq>& hyps,
                                  const std::vector<TokenSeq>& refs);

 private:
  void tsv_row(int step, int stage, const std::string& task, double loss,
               double lr);
  EvalResult eval_internal(const NoiseSpec* spec, int n);

  Model& model_;
  const SynthTask& task_;
  const Dataset& data_;
  RunConfig cfg_;
  Rng rng_;       // batch sampling + gate sampling
  std::ostream* metrics_ = nullptr;
  std::ostream* log_ = nullptr;
  bool wrote_header_ = false;
};

}  // namespace ditra
