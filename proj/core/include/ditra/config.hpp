#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ditra/adapter.hpp"
#include "ditra/backbone.hpp"
#include "ditra/encoders.hpp"
#include "ditra/fusion.hpp"
#include "ditra/task.hpp"

namespace ditra {

// Flat, file-loadable run settings. One key=value per line, `#` comments;
// unknown keys are rejected with their line number so typos can't silently
// revert a setting to its default.
struct RunConfig {
  TaskConfig task{};
  std::uint64_t task_seed = 7;
  std::uint64_t data_seed = 11;
  int n_train = 800;
  int n_test = 100;

  EncoderConfig encoders{};
  FusionConfig fusion{};
  BackboneConfig backbone{};
  PretrainConfig pretrain{};
  AdapterConfig adapter{};
  std::uint64_t model_seed = 5;  // fusion + adapters + scorer init

  int stage1_steps = 2000;
  int stage2_steps = 400;
  int batch_size = 32;
  double stage1_lr = 1e-3;
  double stage2_lr = 1e-5;
  double warmup_frac = 0.03;
  double align_weight = 10.0;  // stage-1 auxiliary row-alignment strength
  double lambda_itm = 0.3;
  double lambda_ttl = 0.2;
  double lambda_itl = 0.5;
  double itm_pool_frac = 0.3;
  int itm_batch = 8;
  std::uint64_t train_seed = 1;
  int log_every = 50;
  int eval_n = 100;

  // keeps dependent dimensions consistent and checks ranges; call after
  // every batch of mutations
  void finalize();
};

// all recognized keys, for help output and strict parsing
std::vector<std::string> config_keys();

// apply one key=value setting; throws ConfigError on unknown key/bad value
void config_set(RunConfig& cfg, const std::string& key,
                const std::string& value);

// parse `key=value` text (used for --set style overrides)
void config_set_kv(RunConfig& cfg, const std::string& kv);

// load a config file over the given defaults
RunConfig load_config(const std::string& path, RunConfig base = RunConfig{});

std::string dump_config(const RunConfig& cfg);

}  // namespace ditra
