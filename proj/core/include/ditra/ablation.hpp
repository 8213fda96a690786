#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "ditra/config.hpp"
#include "ditra/model.hpp"
#include "ditra/noise.hpp"
#include "ditra/task.hpp"
#include "ditra/trainer.hpp"

namespace ditra {

struct RunMeta {
  double train_ms = 0.0;
  double ms_per_step = 0.0;
  StageResult stage1{}, stage2{};
  std::string backbone_hash_before, backbone_hash_after;
  std::string encoder_hash_before, encoder_hash_after;
  bool from_cache = false;
};

struct TrainedRun {
  RunConfig cfg;  // finalized
  std::shared_ptr<SynthTask> task;
  std::shared_ptr<Dataset> data;
  std::shared_ptr<Model> model;
  RunMeta meta;
  std::string metrics_path;  // per-step TSV ("" when not cached)
  EvalResult eval;           // greedy decode on cfg.eval_n test samples
};

// cache file stems; full-config hash vs the subset a pretrained backbone
// actually depends on (task + backbone + pretraining fields)
std::string config_cache_key(const RunConfig& cfg);
std::string backbone_cache_key(const RunConfig& cfg);

// One full run: dataset generation, backbone pretraining (reused via
// cache_dir when present), both training stages, final evaluation. A cached
// run checkpoint short-circuits training entirely.
TrainedRun train_run(RunConfig cfg, const std::string& cache_dir,
                     std::ostream* log);

struct AblationRow {
  std::string label;
  std::uint64_t seed = 0;
  EvalResult eval{};
  std::size_t trainable = 0;
  std::size_t adapter_params = 0;
  double ms_per_step = 0.0;
};

struct AblationTable {
  std::string axis;
  std::vector<AblationRow> rows;

  void write_tsv(std::ostream& os) const;
  double mean_bleu(const std::string& label) const;
  double mean_token_acc(const std::string& label) const;
};

using SeedList = std::vector<std::uint64_t>;

// Each variant label is applied through the config registry, then one run
// per seed (seed drives both the trainable init and the batch order).
AblationTable ablate_fusion(const RunConfig& base,
                            const std::vector<std::string>& kinds,
                            const SeedList& seeds,
                            const std::string& cache_dir, std::ostream* log);
AblationTable ablate_gating(const RunConfig& base,
                            const std::vector<std::string>& strategies,
                            const SeedList& seeds,
                            const std::string& cache_dir, std::ostream* log);
AblationTable ablate_insertion(const RunConfig& base,
                               const std::vector<std::string>& modes,
                               const SeedList& seeds,
                               const std::string& cache_dir,
                               std::ostream* log);
// triples are (itm, ttl, itl) loss weights
AblationTable ablate_weights(const RunConfig& base,
                             const std::vector<std::array<double, 3>>& grid,
                             const SeedList& seeds,
                             const std::string& cache_dir, std::ostream* log);
// schedules are (stage1_steps, stage2_steps)
AblationTable ablate_schedule(const RunConfig& base,
                              const std::vector<std::pair<int, int>>& plans,
                              const SeedList& seeds,
                              const std::string& cache_dir, std::ostream* log);
// trains base per seed, then re-evaluates the same model under each spec
AblationTable noise_table(const RunConfig& base,
                          const std::vector<NoiseSpec>& specs,
                          const SeedList& seeds, const std::string& cache_dir,
                          std::ostream* log);

}  // namespace ditra
