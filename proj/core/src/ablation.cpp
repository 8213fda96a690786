#include "ditra/ablation.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "ditra/checkpoint.hpp"
#include "ditra/error.hpp"
#include "ditra/hash.hpp"

namespace ditra {

namespace fs = std::filesystem;

namespace {

double now_ms() {
  using namespace std::chrono;
  return double(duration_cast<microseconds>(
                    steady_clock::now().time_since_epoch())
                    .count()) /
         1000.0;
}

std::string short_hex(const std::string& text) {
  return hex_digest(sha256_bytes(text.data(), text.size())).substr(0, 16);
}

void write_meta(const std::string& path, const RunMeta& m) {
  std::ofstream os(path);
  os.precision(17);
  os << "train_ms=" << m.train_ms << "\n"
     << "ms_per_step=" << m.ms_per_step << "\n"
     << "s1_steps=" << m.stage1.steps << "\n"
     << "s1_first_ce=" << m.stage1.first_ce << "\n"
     << "s1_ce_500=" << m.stage1.ce_500 << "\n"
     << "s1_final_ce=" << m.stage1.final_ce << "\n"
     << "s1_final_loss=" << m.stage1.final_loss << "\n"
     << "s2_steps=" << m.stage2.steps << "\n"
     << "s2_first_ce=" << m.stage2.first_ce << "\n"
     << "s2_ce_500=" << m.stage2.ce_500 << "\n"
     << "s2_final_ce=" << m.stage2.final_ce << "\n"
     << "s2_final_loss=" << m.stage2.final_loss << "\n"
     << "backbone_hash_before=" << m.backbone_hash_before << "\n"
     << "backbone_hash_after=" << m.backbone_hash_after << "\n"
     << "encoder_hash_before=" << m.encoder_hash_before << "\n"
     << "encoder_hash_after=" << m.encoder_hash_after << "\n";
}

bool read_meta(const std::string& path, RunMeta& m) {
  std::ifstream is(path);
  if (!is) return false;
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto d = [&](const char* k) {
    auto it = kv.find(k);
    return it == kv.end() ? 0.0 : std::stod(it->second);
  };
  auto s = [&](const char* k) {
    auto it = kv.find(k);
    return it == kv.end() ? std::string() : it->second;
  };
  m.train_ms = d("train_ms");
  m.ms_per_step = d("ms_per_step");
  m.stage1.steps = int(d("s1_steps"));
  m.stage1.first_ce = d("s1_first_ce");
  m.stage1.ce_500 = d("s1_ce_500");
  m.stage1.final_ce = d("s1_final_ce");
  m.stage1.final_loss = d("s1_final_loss");
  m.stage2.steps = int(d("s2_steps"));
  m.stage2.first_ce = d("s2_first_ce");
  m.stage2.ce_500 = d("s2_ce_500");
  m.stage2.final_ce = d("s2_final_ce");
  m.stage2.final_loss = d("s2_final_loss");
  m.backbone_hash_before = s("backbone_hash_before");
  m.backbone_hash_after = s("backbone_hash_after");
  m.encoder_hash_before = s("encoder_hash_before");
  m.encoder_hash_after = s("encoder_hash_after");
  return true;
}

}  // namespace

std::string config_cache_key(const RunConfig& cfg) {
  return short_hex(dump_config(cfg));
}

std::string backbone_cache_key(const RunConfig& cfg) {
  // only fields that change pretraining data or the backbone itself
  std::ostringstream os;
  os.precision(17);
  const TaskConfig& t = cfg.task;
  os << t.vocab << ' ' << t.l_min << ' ' << t.l_max << ' ' << t.grid << ' '
     << t.patch << ' ' << t.band << ' ' << t.band_a << ' ' << t.band_b << ' '
     << t.glyph_seed << ' ' << cfg.task_seed << '\n';
  const BackboneConfig& b = cfg.backbone;
  os << b.d_llm << ' ' << b.n_layers << ' ' << b.n_heads << ' ' << b.d_ffn
     << ' ' << b.max_pos << ' ' << b.n_slots << ' ' << b.init_seed << ' '
     << b.slot_seed << ' ' << b.slot_std << '\n';
  const PretrainConfig& p = cfg.pretrain;
  os << p.max_steps << ' ' << p.batch_size << ' ' << p.lr << ' '
     << p.warmup_frac << ' ' << p.mix_translate << ' ' << p.mix_transcribe
     << ' ' << p.noise << ' ' << p.gate_acc << ' ' << p.abort_acc << ' '
     << p.heldout << ' ' << p.data_seed << '\n';
  return short_hex(os.str());
}

TrainedRun train_run(RunConfig cfg, const std::string& cache_dir,
                     std::ostream* log) {
  cfg.finalize();
  TrainedRun run;
  run.cfg = cfg;
  run.task = std::make_shared<SynthTask>(cfg.task, cfg.task_seed);
  run.data = std::make_shared<Dataset>(
      gen_dataset(*run.task, cfg.data_seed, cfg.n_train, cfg.n_test));
  run.model = std::make_shared<Model>(cfg, *run.task);

  const bool cache = !cache_dir.empty();
  std::string run_stem, run_ckpt, run_meta, run_tsv;
  if (cache) {
    fs::create_directories(cache_dir);
    run_stem = cache_dir + "/run_" + config_cache_key(cfg);
    run_ckpt = run_stem + ".ckpt";
    run_meta = run_stem + ".meta";
    run_tsv = run_stem + ".tsv";
  }

  if (cache && fs::exists(run_ckpt) && read_meta(run_meta, run.meta)) {
    run.model->load_from(load_checkpoint(run_ckpt));
    run.meta.from_cache = true;
    run.metrics_path = fs::exists(run_tsv) ? run_tsv : std::string();
    if (log) *log << "run " << config_cache_key(cfg) << " loaded from cache\n";
  } else {
    Backbone& bb = run.model->backbone();
    std::string bb_ckpt =
        cache ? cache_dir + "/bb_" + backbone_cache_key(cfg) + ".ckpt"
              : std::string();
    if (cache && fs::exists(bb_ckpt)) {
      load_backbone(bb, load_checkpoint(bb_ckpt));
      if (log) *log << "backbone loaded from cache\n";
    } else {
      bb.pretrain(*run.task, cfg.pretrain, log);
      bb.freeze();
      if (cache)
        save_checkpoint(bb_ckpt, backbone_checkpoint(bb, dump_config(cfg)));
    }
    run.meta.backbone_hash_before = hex_digest(bb.content_hash());
    run.meta.encoder_hash_before =
        hex_digest(run.model->encoders().content_hash());

    Trainer tr(*run.model, *run.task, *run.data, cfg);
    tr.set_log_stream(log);
    std::ofstream mfs;
    if (cache) {
      mfs.open(run_tsv);
      mfs.precision(17);
      tr.set_metrics_stream(&mfs);
    }
    double t0 = now_ms();
    run.meta.stage1 = tr.run_stage1();
    run.meta.stage2 = tr.run_stage2();
    run.meta.train_ms = now_ms() - t0;
    int steps = run.meta.stage1.steps + run.meta.stage2.steps;
    run.meta.ms_per_step = run.meta.train_ms / double(std::max(1, steps));

    run.meta.backbone_hash_after = hex_digest(bb.content_hash());
    run.meta.encoder_hash_after =
        hex_digest(run.model->encoders().content_hash());
    if (run.meta.backbone_hash_after != run.meta.backbone_hash_before ||
        run.meta.encoder_hash_after != run.meta.encoder_hash_before)
      throw TrainError("frozen parameters changed during training");

    if (cache) {
      mfs.close();
      save_checkpoint(run_ckpt, run.model->to_checkpoint(dump_config(cfg)));
      write_meta(run_meta, run.meta);
      run.metrics_path = run_tsv;
    }
  }

  Trainer ev(*run.model, *run.task, *run.data, cfg);
  run.eval = ev.evaluate(cfg.eval_n);
  if (log)
    *log << "eval n " << run.eval.n << " bleu " << run.eval.bleu
         << " token_acc " << run.eval.token_acc << " exact " << run.eval.exact
         << " cer " << run.eval.cer << "\n";
  return run;
}

void AblationTable::write_tsv(std::ostream& os) const {
  os << "axis\tlabel\tseed\tbleu\ttoken_acc\texact\tcer\tnumeric\t"
        "trainable\tadapter_params\tms_per_step\n";
  for (const auto& r : rows)
    os << axis << '\t' << r.label << '\t' << r.seed << '\t' << r.eval.bleu
       << '\t' << r.eval.token_acc << '\t' << r.eval.exact << '\t'
       << r.eval.cer << '\t' << r.eval.numeric.value << '\t' << r.trainable
       << '\t' << r.adapter_params << '\t' << r.ms_per_step << '\n';
}

double AblationTable::mean_bleu(const std::string& label) const {
  double s = 0.0;
  int n = 0;
  for (const auto& r : rows)
    if (r.label == label) s += r.eval.bleu, ++n;
  return n ? s / n : 0.0;
}

double AblationTable::mean_token_acc(const std::string& label) const {
  double s = 0.0;
  int n = 0;
  for (const auto& r : rows)
    if (r.label == label) s += r.eval.token_acc, ++n;
  return n ? s / n : 0.0;
}

namespace {

AblationRow row_from(const std::string& label, std::uint64_t seed,
                     const TrainedRun& run) {
  AblationRow r;
  r.label = label;
  r.seed = seed;
  r.eval = run.eval;
  ParamReport pr = run.model->param_report();
  r.trainable = pr.trainable();
  r.adapter_params = pr.adapters;
  r.ms_per_step = run.meta.ms_per_step;
  return r;
}

RunConfig seeded(RunConfig cfg, std::uint64_t seed) {
  cfg.model_seed = seed;
  cfg.train_seed = seed;
  return cfg;
}

AblationTable sweep(const std::string& axis, const std::string& key,
                    const RunConfig& base,
                    const std::vector<std::string>& values,
                    const SeedList& seeds, const std::string& cache_dir,
                    std::ostream* log) {
  AblationTable tab;
  tab.axis = axis;
  for (const auto& v : values)
    for (auto seed : seeds) {
      RunConfig cfg = seeded(base, seed);
      config_set(cfg, key, v);
      if (log) *log << "[" << axis << "] " << v << " seed " << seed << "\n";
      tab.rows.push_back(row_from(v, seed, train_run(cfg, cache_dir, log)));
    }
  return tab;
}

}  // namespace

AblationTable ablate_fusion(const RunConfig& base,
                            const std::vector<std::string>& kinds,
                            const SeedList& seeds,
                            const std::string& cache_dir, std::ostream* log) {
  AblationTable tab;
  tab.axis = "fusion";
  for (const auto& k : kinds)
    for (auto seed : seeds) {
      RunConfig cfg = seeded(base, seed);
      if (k == "semantic_only" || k == "detail_only")
        config_set(cfg, "streams", k);
      else
        config_set(cfg, "fusion", k);
      if (log) *log << "[fusion] " << k << " seed " << seed << "\n";
      tab.rows.push_back(row_from(k, seed, train_run(cfg, cache_dir, log)));
    }
  return tab;
}

AblationTable ablate_gating(const RunConfig& base,
                            const std::vector<std::string>& strategies,
                            const SeedList& seeds,
                            const std::string& cache_dir, std::ostream* log) {
  return sweep("gating", "gating", base, strategies, seeds, cache_dir, log);
}

AblationTable ablate_insertion(const RunConfig& base,
                               const std::vector<std::string>& modes,
                               const SeedList& seeds,
                               const std::string& cache_dir,
                               std::ostream* log) {
  return sweep("insertion", "insertion", base, modes, seeds, cache_dir, log);
}

AblationTable ablate_weights(const RunConfig& base,
                             const std::vector<std::array<double, 3>>& grid,
                             const SeedList& seeds,
                             const std::string& cache_dir, std::ostream* log) {
  AblationTable tab;
  tab.axis = "weights";
  for (const auto& w : grid)
    for (auto seed : seeds) {
      RunConfig cfg = seeded(base, seed);
      cfg.lambda_itm = w[0];
      cfg.lambda_ttl = w[1];
      cfg.lambda_itl = w[2];
      std::ostringstream lb;
      lb << "itm=" << w[0] << ",ttl=" << w[1] << ",itl=" << w[2];
      if (log) *log << "[weights] " << lb.str() << " seed " << seed << "\n";
      tab.rows.push_back(
          row_from(lb.str(), seed, train_run(cfg, cache_dir, log)));
    }
  return tab;
}

AblationTable ablate_schedule(const RunConfig& base,
                              const std::vector<std::pair<int, int>>& plans,
                              const SeedList& seeds,
                              const std::string& cache_dir,
                              std::ostream* log) {
  AblationTable tab;
  tab.axis = "schedule";
  for (const auto& [s1, s2] : plans)
    for (auto seed : seeds) {
      RunConfig cfg = seeded(base, seed);
      cfg.stage1_steps = s1;
      cfg.stage2_steps = s2;
      std::ostringstream lb;
      lb << "s1=" << s1 << ",s2=" << s2;
      if (log) *log << "[schedule] " << lb.str() << " seed " << seed << "\n";
      tab.rows.push_back(
          row_from(lb.str(), seed, train_run(cfg, cache_dir, log)));
    }
  return tab;
}

AblationTable noise_table(const RunConfig& base,
                          const std::vector<NoiseSpec>& specs,
                          const SeedList& seeds, const std::string& cache_dir,
                          std::ostream* log) {
  AblationTable tab;
  tab.axis = "noise";
  for (auto seed : seeds) {
    RunConfig cfg = seeded(base, seed);
    TrainedRun run = train_run(cfg, cache_dir, log);
    Trainer tr(*run.model, *run.task, *run.data, run.cfg);
    for (const auto& spec : specs) {
      AblationRow r = row_from(to_string(spec.kind), seed, run);
      r.eval = spec.kind == NoiseSpec::Kind::none
                   ? run.eval
                   : tr.evaluate_noisy(spec, run.cfg.eval_n);
      if (log)
        *log << "[noise] " << r.label << " seed " << seed << " bleu "
             << r.eval.bleu << "\n";
      tab.rows.push_back(r);
    }
  }
  return tab;
}

}  // namespace ditra
