#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "ditra/config.hpp"
#include "ditra/error.hpp"

using namespace ditra;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  std::ofstream out(name);
  out << body;
  return name;
}

}  // namespace

TEST_CASE("defaults are consistent and finalize accepts them") {
  RunConfig cfg;
  cfg.finalize();
  CHECK(cfg.stage1_steps == 2000);
  CHECK(cfg.stage2_steps == 400);
  CHECK(cfg.lambda_itm == 0.3);
  CHECK(cfg.lambda_ttl == 0.2);
  CHECK(cfg.lambda_itl == 0.5);
  // derived dimensions line up after finalize
  CHECK(cfg.fusion.d_llm == cfg.backbone.d_llm);
  CHECK(cfg.adapter.d_llm == cfg.backbone.d_llm);
  CHECK(cfg.adapter.n_layers == cfg.backbone.n_layers);
  CHECK(cfg.backbone.n_slots == cfg.task.n_patches());
}

TEST_CASE("config_set parses typed values and rejects junk") {
  RunConfig cfg;
  config_set(cfg, "stage1_steps", "123");
  CHECK(cfg.stage1_steps == 123);
  config_set(cfg, "stage2_lr", "2.5e-4");
  CHECK(cfg.stage2_lr == 2.5e-4);
  config_set(cfg, "fusion", "concat");
  CHECK(cfg.fusion.kind == FusionKind::concat);
  config_set(cfg, "streams", "semantic_only");
  CHECK(cfg.fusion.streams == Streams::semantic_only);
  config_set(cfg, "gating", "fixed");
  CHECK(cfg.adapter.gate == GateStrategy::fixed_value);
  config_set(cfg, "insertion", "late");
  CHECK(cfg.adapter.insertion == InsertionMode::late);
  config_set(cfg, "train_seed", "42");
  CHECK(cfg.train_seed == 42);

  CHECK_THROWS_AS(config_set(cfg, "no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(config_set(cfg, "stage1_steps", "abc"), ConfigError);
  CHECK_THROWS_AS(config_set(cfg, "fusion", "bogus"), ConfigError);

  config_set_kv(cfg, "batch_size=16");
  CHECK(cfg.batch_size == 16);
  CHECK_THROWS_AS(config_set_kv(cfg, "no_equals_sign"), ConfigError);
}

TEST_CASE("config files: comments, blanks, strict keys with line numbers") {
  std::string path = write_temp("test_cfg_ok.cfg",
                                "# comment line\n"
                                "\n"
                                "stage1_steps = 64\n"
                                "  fusion = sum   # trailing comment\n"
                                "train_seed=9\n");
  RunConfig cfg = load_config(path);
  CHECK(cfg.stage1_steps == 64);
  CHECK(cfg.fusion.kind == FusionKind::sum);
  CHECK(cfg.train_seed == 9);
  std::remove(path.c_str());

  std::string bad = write_temp("test_cfg_bad.cfg",
                               "stage1_steps = 64\n"
                               "stage_one_steps = 64\n");
  try {
    (void)load_config(bad);
    CHECK(false);
  } catch (const ConfigError& e) {
    // the offending line number appears in the message
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  std::remove(bad.c_str());

  CHECK_THROWS_AS((void)load_config("missing_config_file.cfg"), ConfigError);
}

TEST_CASE("dump and reload round-trips every setting") {
  RunConfig cfg;
  config_set(cfg, "fusion", "interleave");
  config_set(cfg, "gating", "token_dependent");
  config_set(cfg, "stage2_steps", "77");
  config_set(cfg, "lambda_itm", "0.4");
  config_set(cfg, "lambda_itl", "0.4");
  config_set(cfg, "pretrain_noise", "0.25");
  config_set(cfg, "adapter_r", "4");
  cfg.finalize();

  std::string path = write_temp("test_cfg_dump.cfg", dump_config(cfg));
  RunConfig back = load_config(path);
  back.finalize();
  CHECK(dump_config(back) == dump_config(cfg));
  std::remove(path.c_str());
}

TEST_CASE("finalize rejects invalid settings") {
  RunConfig a;
  a.stage1_steps = -1;
  CHECK_THROWS_AS(a.finalize(), ConfigError);

  RunConfig b;
  b.lambda_itm = -0.1;
  CHECK_THROWS_AS(b.finalize(), ConfigError);

  RunConfig c;
  c.batch_size = 0;
  CHECK_THROWS_AS(c.finalize(), ConfigError);

  RunConfig d;
  d.task.l_max = 99;  // sources would not fit the slot grid
  CHECK_THROWS_AS(d.finalize(), ConfigError);
}
