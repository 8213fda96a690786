#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ditra/ablation.hpp"
#include "ditra/checkpoint.hpp"
#include "ditra/error.hpp"
#include "ditra/gradcheck.hpp"
#include "ditra/model.hpp"
#include "ditra/noise.hpp"
#include "ditra/trainer.hpp"

namespace {

using namespace ditra;

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string cache = "runs";
  std::string out;
  std::string seeds = "1,2,3";
};

void add_common(CLI::App* cmd, Common& c, bool with_seeds = false) {
  cmd->add_option("--config", c.config_path, "key=value config file");
  cmd->add_option("--set", c.sets, "override, e.g. --set stage2_steps=100")
      ->take_all();
  cmd->add_option("--cache", c.cache,
                  "artifact cache directory ('' disables caching)");
  cmd->add_option("--out", c.out, "report path (default: stdout)");
  if (with_seeds) cmd->add_option("--seeds", c.seeds, "comma-separated seeds");
}

RunConfig build_config(const Common& c) {
  RunConfig cfg;
  if (!c.config_path.empty()) cfg = load_config(c.config_path, cfg);
  for (const auto& kv : c.sets) config_set_kv(cfg, kv);
  return cfg;
}

RunConfig config_from_text(const std::string& text,
                           const std::vector<std::string>& sets) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    config_set_kv(cfg, line);
  }
  for (const auto& kv : sets) config_set_kv(cfg, kv);
  return cfg;
}

SeedList parse_seeds(const std::string& s) {
  SeedList out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ','))
    if (!tok.empty()) out.push_back(std::stoull(tok));
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

int emit(const AblationTable& tab, const std::string& out) {
  if (out.empty()) {
    tab.write_tsv(std::cout);
  } else {
    std::ofstream os(out);
    if (!os) throw ConfigError("cannot open report path: " + out);
    os.precision(10);
    tab.write_tsv(os);
    std::cout << "report written to " << out << "\n";
  }
  return 0;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ','))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

int cmd_gen_data(const Common& c, const std::string& dir) {
  RunConfig cfg = build_config(c);
  cfg.finalize();
  SynthTask task(cfg.task, cfg.task_seed);
  Dataset ds = gen_dataset(task, cfg.data_seed, cfg.n_train, cfg.n_test);
  std::filesystem::create_directories(dir);
  save_samples(dir + "/train.txt", ds.train);
  save_samples(dir + "/test.txt", ds.test);
  std::cout << "wrote " << ds.train.size() << " train and " << ds.test.size()
            << " test samples to " << dir << "\n";
  return 0;
}

int cmd_pretrain(const Common& c, bool force) {
  RunConfig cfg = build_config(c);
  cfg.finalize();
  SynthTask task(cfg.task, cfg.task_seed);
  std::string path;
  if (!c.cache.empty()) {
    std::filesystem::create_directories(c.cache);
    path = c.cache + "/bb_" + backbone_cache_key(cfg) + ".ckpt";
    if (!force && std::filesystem::exists(path)) {
      std::cout << "backbone checkpoint already cached: " << path << "\n";
      return 0;
    }
  }
  Backbone bb(cfg.backbone);
  PretrainResult r = bb.pretrain(task, cfg.pretrain, &std::cout);
  bb.freeze();
  std::cout << "pretrained in " << r.steps << " steps; held-out accuracy:"
            << " translate " << r.acc_translate << " transcribe "
            << r.acc_transcribe << " text_only " << r.acc_text_only << "\n";
  if (!path.empty()) {
    save_checkpoint(path, backbone_checkpoint(bb, dump_config(cfg)));
    std::cout << "saved " << path << "\n";
  }
  return 0;
}

void print_eval(const EvalResult& e) {
  std::cout << "n\tbleu\ttoken_acc\texact\tcer\tnumeric\n"
            << e.n << '\t' << e.bleu << '\t' << e.token_acc << '\t' << e.exact
            << '\t' << e.cer << '\t' << e.numeric.value
            << (e.numeric.vacuous ? " (vacuous)" : "") << "\n";
}

int cmd_train(const Common& c, const std::string& ckpt_out) {
  RunConfig cfg = build_config(c);
  TrainedRun run = train_run(cfg, c.cache, &std::cout);
  print_eval(run.eval);
  if (!run.metrics_path.empty())
    std::cout << "step metrics: " << run.metrics_path << "\n";
  if (!ckpt_out.empty()) {
    save_checkpoint(ckpt_out, run.model->to_checkpoint(dump_config(run.cfg)));
    std::cout << "checkpoint saved to " << ckpt_out << "\n";
  }
  return 0;
}

int cmd_eval(const Common& c, const std::string& ckpt, int n,
             const std::string& noise_kind, const NoiseSpec& flags) {
  Checkpoint ck = load_checkpoint(ckpt);
  RunConfig cfg = config_from_text(ck.config_text, c.sets);
  cfg.finalize();
  SynthTask task(cfg.task, cfg.task_seed);
  Dataset ds = gen_dataset(task, cfg.data_seed, cfg.n_train, cfg.n_test);
  Model model(cfg, task);
  model.load_from(ck);
  Trainer ev(model, task, ds, cfg);
  int count = n > 0 ? n : cfg.eval_n;
  EvalResult r;
  if (noise_kind.empty() || noise_kind == "none") {
    r = ev.evaluate(count);
  } else {
    NoiseSpec spec = flags;
    spec.kind = noise_kind_from_string(noise_kind);
    r = ev.evaluate_noisy(spec, count);
  }
  print_eval(r);
  return 0;
}

// 4-patch fusion instance and a 2-layer adapter stack, checked against
// central finite differences over fresh untaped forwards
int cmd_grad_check(int seeds, double tol) {
  bool ok = true;
  for (int seed = 1; seed <= seeds; ++seed) {
    Rng rng(std::uint64_t(seed) * 0x9E3779B9u + 17);

    FusionConfig fc;
    fc.d_sem = 6;
    fc.d_det = 8;
    fc.d = 16;  // shared cross-attention width
    fc.n_heads = 4;
    fc.d_mlp = 24;
    fc.d_llm = 24;
    Rng frng = rng.fork(1);
    Fusion fusion(fc, frng);
    Tensor sem = Tensor::gaussian({4, fc.d_sem}, rng, 1.0);
    Tensor det = Tensor::gaussian({4, fc.d_det}, rng, 1.0);
    for (auto& [name, p] : fusion.named_params())
      for (auto& x : p.values()) x = 0.25 * rng.next_gaussian();

    auto fusion_loss = [&]() {
      Tensor f = fusion.forward(sem, det);
      return mean_all(mul(f, f)).item();
    };
    double fusion_err = 0.0;
    {
      Tape tape;
      Tensor f = fusion.forward(sem, det);
      GradMap grads = tape.backward(mean_all(mul(f, f)));
      for (auto& [name, p] : fusion.named_params())
        fusion_err =
            std::max(fusion_err,
                     max_rel_err(grads.of(p), numeric_grad(fusion_loss, p)));
    }

    AdapterConfig ac;
    ac.n_layers = 2;
    ac.d_llm = 16;
    ac.r = 2;
    ac.gate = GateStrategy::layer_plus_token;  // covers both gate inputs
    Rng arng = rng.fork(2);
    AdapterStack adapters(ac, arng);
    for (auto& [name, p] : adapters.named_params())
      for (auto& x : p.values()) x = 0.25 * rng.next_gaussian();
    Tensor fused = Tensor::gaussian({4, ac.d_llm}, rng, 1.0);
    std::vector<Tensor> ffn;
    for (int l = 0; l < ac.n_layers; ++l)
      ffn.push_back(Tensor::gaussian({3, ac.d_llm}, rng, 1.0));

    auto adapter_loss = [&]() {
      AdapterHook h = adapters.make_hook(fused, nullptr);
      Tensor sum;
      for (int l = 0; l < ac.n_layers; ++l) {
        Tensor out = h(ffn[size_t(l)], l);
        Tensor sq = mean_all(mul(out, out));
        sum = sum.defined() ? add(sum, sq) : sq;
      }
      return sum.item();
    };
    double adapter_err = 0.0;
    {
      Tape tape;
      AdapterHook h = adapters.make_hook(fused, nullptr);
      Tensor sum;
      for (int l = 0; l < ac.n_layers; ++l) {
        Tensor out = h(ffn[size_t(l)], l);
        Tensor sq = mean_all(mul(out, out));
        sum = sum.defined() ? add(sum, sq) : sq;
      }
      GradMap grads = tape.backward(sum);
      for (auto& [name, p] : adapters.named_params())
        adapter_err =
            std::max(adapter_err,
                     max_rel_err(grads.of(p), numeric_grad(adapter_loss, p)));
    }

    bool pass = fusion_err <= tol && adapter_err <= tol;
    ok = ok && pass;
    std::cout << "seed " << seed << "  fusion max_rel_err " << std::scientific
              << std::setprecision(3) << fusion_err << "  adapter max_rel_err "
              << adapter_err << (pass ? "  ok" : "  FAIL") << "\n"
              << std::defaultfloat;
  }
  std::cout << (ok ? "grad-check passed" : "grad-check FAILED") << "\n";
  return ok ? 0 : 3;
}

int cmd_count_params(const Common& c) {
  RunConfig cfg = build_config(c);
  cfg.finalize();
  SynthTask task(cfg.task, cfg.task_seed);
  Model model(cfg, task);
  ParamReport pr = model.param_report();
  std::cout << "component\tparams\tstatus\n"
            << "backbone\t" << pr.backbone << "\tfrozen\n"
            << "slot_codes\t" << pr.slot_codes << "\tfrozen\n"
            << "encoders\t" << pr.encoders << "\tfrozen\n"
            << "fusion\t" << pr.fusion << "\ttrainable\n"
            << "adapters\t" << pr.adapters << "\ttrainable\n"
            << "match_scorer\t" << pr.scorer << "\ttrainable\n"
            << "total_frozen\t" << pr.frozen() << "\t\n"
            << "total_trainable\t" << pr.trainable() << "\t\n"
            << "total\t" << pr.total() << "\t\n";
  std::cout.precision(6);
  std::cout << "trainable_ratio\t" << pr.trainable_ratio() << "\t\n";
  return 0;
}

std::vector<std::array<double, 3>> parse_weight_grid(const std::string& s) {
  std::vector<std::array<double, 3>> grid;
  std::istringstream cells(s);
  std::string cell;
  while (std::getline(cells, cell, ';')) {
    auto parts = split_csv(cell);
    if (parts.size() != 3)
      throw ConfigError("weight grid cell needs 3 values: " + cell);
    grid.push_back({std::stod(parts[0]), std::stod(parts[1]),
                    std::stod(parts[2])});
  }
  if (grid.empty()) throw ConfigError("empty weight grid");
  return grid;
}

std::vector<std::pair<int, int>> parse_schedule(const std::string& s,
                                                const RunConfig& base) {
  std::vector<std::pair<int, int>> plans;
  std::istringstream cells(s);
  std::string cell;
  while (std::getline(cells, cell, ';')) {
    auto parts = split_csv(cell);
    if (parts.size() != 2)
      throw ConfigError("schedule cell needs s1,s2: " + cell);
    plans.emplace_back(std::stoi(parts[0]), std::stoi(parts[1]));
  }
  if (plans.empty())
    plans = {{base.stage1_steps, base.stage2_steps}, {0, base.stage2_steps}};
  return plans;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "ditra: dual-stream image translation with a frozen decoder backbone"};
  app.require_subcommand(1);

  Common c;
  std::string dir = "data", ckpt, ckpt_out, noise_kind, kinds_csv, grid_csv,
              plans_csv;
  int eval_count = 0, gc_seeds = 10;
  double gc_tol = 1e-4;
  bool force = false;
  NoiseSpec nflags;

  auto* gen = app.add_subcommand("gen-data", "render a dataset to text files");
  add_common(gen, c);
  gen->add_option("--dir", dir, "output directory");

  auto* pre = app.add_subcommand("pretrain-backbone",
                                 "pretrain and cache the frozen decoder");
  add_common(pre, c);
  pre->add_flag("--force", force, "retrain even when cached");

  auto* tr = app.add_subcommand("train", "two-stage training run");
  add_common(tr, c);
  tr->add_option("--ckpt-out", ckpt_out, "also save the model checkpoint here");

  auto* ev = app.add_subcommand("eval", "evaluate a saved checkpoint");
  add_common(ev, c);
  ev->add_option("--ckpt", ckpt, "model checkpoint")->required();
  ev->add_option("--n", eval_count, "test samples (default: config eval_n)");
  ev->add_option("--noise", noise_kind,
                 "none|blur|occlusion|downsample|quantize|mixed");
  ev->add_option("--sigma", nflags.sigma, "blur strength");
  ev->add_option("--fraction", nflags.fraction, "occluded area fraction");
  ev->add_option("--factor", nflags.factor, "downsample block size");
  ev->add_option("--levels", nflags.levels, "quantization levels");
  ev->add_option("--noise-seed", nflags.seed, "occlusion placement seed");

  auto* gc = app.add_subcommand(
      "grad-check", "analytic vs finite-difference gradients; exit 3 on fail");
  gc->add_option("--seeds", gc_seeds, "number of seeds");
  gc->add_option("--tol", gc_tol, "max relative error");

  auto* af = app.add_subcommand("ablate-fusion", "compare fusion strategies");
  add_common(af, c, true);
  af->add_option("--kinds", kinds_csv, "comma-separated strategy list");

  auto* ag = app.add_subcommand("ablate-gating", "compare gate strategies");
  add_common(ag, c, true);
  ag->add_option("--kinds", kinds_csv, "comma-separated strategy list");

  auto* ai =
      app.add_subcommand("ablate-insertion", "compare adapter placements");
  add_common(ai, c, true);
  ai->add_option("--kinds", kinds_csv, "comma-separated placement list");

  auto* aw = app.add_subcommand("ablate-weights", "loss-weight grid");
  add_common(aw, c, true);
  aw->add_option("--grid", grid_csv, "cells 'itm,ttl,itl;itm,ttl,itl;...'");

  auto* as = app.add_subcommand("ablate-schedule", "stage-budget grid");
  add_common(as, c, true);
  as->add_option("--plans", plans_csv, "cells 's1,s2;s1,s2;...'");

  auto* nz = app.add_subcommand("noise-eval",
                                "degradation table under input corruption");
  add_common(nz, c, true);
  nz->add_option("--sigma", nflags.sigma, "blur strength");
  nz->add_option("--fraction", nflags.fraction, "occluded area fraction");
  nz->add_option("--factor", nflags.factor, "downsample block size");
  nz->add_option("--levels", nflags.levels, "quantization levels");
  nz->add_option("--noise-seed", nflags.seed, "occlusion placement seed");

  auto* cp =
      app.add_subcommand("count-params", "per-component parameter accounting");
  add_common(cp, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    std::cout.precision(10);
    if (gen->parsed()) return cmd_gen_data(c, dir);
    if (pre->parsed()) return cmd_pretrain(c, force);
    if (tr->parsed()) return cmd_train(c, ckpt_out);
    if (ev->parsed()) return cmd_eval(c, ckpt, eval_count, noise_kind, nflags);
    if (gc->parsed()) return cmd_grad_check(gc_seeds, gc_tol);

    if (af->parsed()) {
      std::vector<std::string> kinds =
          kinds_csv.empty()
              ? std::vector<std::string>{"dsam", "concat", "sum", "interleave",
                                         "ca_sem_to_det", "ca_det_to_sem",
                                         "self_attention"}
              : split_csv(kinds_csv);
      return emit(ablate_fusion(build_config(c), kinds, parse_seeds(c.seeds),
                                c.cache, &std::cout),
                  c.out);
    }
    if (ag->parsed()) {
      std::vector<std::string> kinds =
          kinds_csv.empty()
              ? std::vector<std::string>{"global", "layer_specific",
                                         "token_dependent", "layer_plus_token",
                                         "fixed", "random", "none"}
              : split_csv(kinds_csv);
      return emit(ablate_gating(build_config(c), kinds, parse_seeds(c.seeds),
                                c.cache, &std::cout),
                  c.out);
    }
    if (ai->parsed()) {
      std::vector<std::string> kinds =
          kinds_csv.empty()
              ? std::vector<std::string>{"uniform", "early", "late"}
              : split_csv(kinds_csv);
      return emit(ablate_insertion(build_config(c), kinds,
                                   parse_seeds(c.seeds), c.cache, &std::cout),
                  c.out);
    }
    if (aw->parsed()) {
      std::vector<std::array<double, 3>> grid =
          grid_csv.empty()
              ? std::vector<std::array<double, 3>>{{0.3, 0.2, 0.5},
                                                   {0.5, 0.2, 0.3},
                                                   {0.2, 0.2, 0.6},
                                                   {0.33, 0.33, 0.34},
                                                   {0.5, 0.0, 0.5}}
              : parse_weight_grid(grid_csv);
      return emit(ablate_weights(build_config(c), grid, parse_seeds(c.seeds),
                                 c.cache, &std::cout),
                  c.out);
    }
    if (as->parsed()) {
      RunConfig base = build_config(c);
      return emit(ablate_schedule(base, parse_schedule(plans_csv, base),
                                  parse_seeds(c.seeds), c.cache, &std::cout),
                  c.out);
    }
    if (nz->parsed()) {
      std::vector<NoiseSpec> specs;
      for (auto k :
           {NoiseSpec::Kind::none, NoiseSpec::Kind::blur,
            NoiseSpec::Kind::occlusion, NoiseSpec::Kind::downsample,
            NoiseSpec::Kind::quantize, NoiseSpec::Kind::mixed}) {
        NoiseSpec s = nflags;
        s.kind = k;
        specs.push_back(s);
      }
      return emit(noise_table(build_config(c), specs, parse_seeds(c.seeds),
                              c.cache, &std::cout),
                  c.out);
    }
    if (cp->parsed()) return cmd_count_params(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
