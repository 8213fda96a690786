#include "ditra/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "ditra/error.hpp"

namespace ditra {

namespace {

int parse_int(const std::string& s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ConfigError("not an integer: '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  // accept hex with 0x prefix for seed-style values
  const bool hex = s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X');
  const char* b = s.data() + (hex ? 2 : 0);
  auto [p, ec] = std::from_chars(b, s.data() + s.size(), v, hex ? 16 : 10);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ConfigError("not an unsigned integer: '" + s + "'");
  return v;
}

double parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + s + "'");
  }
}

struct Entry {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string fmt_double(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> r = {
      // task geometry and alphabet
      {"vocab", [](RunConfig& c, const std::string& v) { c.task.vocab = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.task.vocab); }},
      {"l_min", [](RunConfig& c, const std::string& v) { c.task.l_min = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.task.l_min); }},
      {"l_max", [](RunConfig& c, const std::string& v) { c.task.l_max = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.task.l_max); }},
      {"grid", [](RunConfig& c, const std::string& v) { c.task.grid = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.task.grid); }},
      {"patch", [](RunConfig& c, const std::string& v) { c.task.patch = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.task.patch); }},
      {"band", [](RunConfig& c, const std::string& v) { c.task.band = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.task.band); }},
      {"band_a", [](RunConfig& c, const std::string& v) { c.task.band_a = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.task.band_a); }},
      {"band_b", [](RunConfig& c, const std::string& v) { c.task.band_b = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.task.band_b); }},
      {"glyph_seed", [](RunConfig& c, const std::string& v) { c.task.glyph_seed = parse_u64(v); },
       [](const RunConfig& c) { return std::to_string(c.task.glyph_seed); }},
      {"task_seed", [](RunConfig& c, const std::string& v) { c.task_seed = parse_u64(v); },
       [](const RunConfig& c) { return std::to_string(c.task_seed); }},
      {"data_seed", [](RunConfig& c, const std::string& v) { c.data_seed = parse_u64(v); },
       [](const RunConfig& c) { return std::to_string(c.data_seed); }},
      {"n_train", [](RunConfig& c, const std::string& v) { c.n_train = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.n_train); }},
      {"n_test", [](RunConfig& c, const std::string& v) { c.n_test = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.n_test); }},
      // encoders
      {"d_sem", [](RunConfig& c, const std::string& v) { c.encoders.d_sem = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.encoders.d_sem); }},
      {"d_det", [](RunConfig& c, const std::string& v) { c.encoders.d_det = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.encoders.d_det); }},
      {"encoder_seed", [](RunConfig& c, const std::string& v) { c.encoders.seed = parse_u64(v); },
       [](const RunConfig& c) { return std::to_string(c.encoders.seed); }},
      // fusion
      {"fusion", [](RunConfig& c, const std::string& v) { c.fusion.kind = fusion_kind_from_string(v); },
       [](const RunConfig& c) { return to_string(c.fusion.kind); }},
      {"streams", [](RunConfig& c, const std::string& v) { c.fusion.streams = streams_from_string(v); },
       [](const RunConfig& c) { return to_string(c.fusion.streams); }},
      {"fusion_d", [](RunConfig& c, const std::string& v) { c.fusion.d = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.fusion.d); }},
      {"fusion_heads", [](RunConfig& c, const std::string& v) { c.fusion.n_heads = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.fusion.n_heads); }},
      {"fusion_mlp", [](RunConfig& c, const std::string& v) { c.fusion.d_mlp = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.fusion.d_mlp); }},
      {"ca_hidden", [](RunConfig& c, const std::string& v) { c.fusion.ca_hidden = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.fusion.ca_hidden); }},
      // backbone
      {"d_llm", [](RunConfig& c, const std::string& v) { c.backbone.d_llm = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.backbone.d_llm); }},
      {"n_layers", [](RunConfig& c, const std::string& v) { c.backbone.n_layers = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.backbone.n_layers); }},
      {"n_heads", [](RunConfig& c, const std::string& v) { c.backbone.n_heads = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.backbone.n_heads); }},
      {"d_ffn", [](RunConfig& c, const std::string& v) { c.backbone.d_ffn = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.backbone.d_ffn); }},
      {"max_pos", [](RunConfig& c, const std::string& v) { c.backbone.max_pos = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.backbone.max_pos); }},
      {"backbone_seed", [](RunConfig& c, const std::string& v) { c.backbone.init_seed = parse_u64(v); },
       [](const RunConfig& c) { return std::to_string(c.backbone.init_seed); }},
      {"slot_seed", [](RunConfig& c, const std::string& v) { c.backbone.slot_seed = parse_u64(v); },
       [](const RunConfig& c) { return std::to_string(c.backbone.slot_seed); }},
      {"slot_std", [](RunConfig& c, const std::string& v) { c.backbone.slot_std = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.backbone.slot_std); }},
      // backbone pretraining
      {"pretrain_steps", [](RunConfig& c, const std::string& v) { c.pretrain.max_steps = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.pretrain.max_steps); }},
      {"pretrain_batch", [](RunConfig& c, const std::string& v) { c.pretrain.batch_size = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.pretrain.batch_size); }},
      {"pretrain_lr", [](RunConfig& c, const std::string& v) { c.pretrain.lr = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.pretrain.lr); }},
      {"pretrain_warmup", [](RunConfig& c, const std::string& v) { c.pretrain.warmup_frac = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.pretrain.warmup_frac); }},
      {"pretrain_mix_translate", [](RunConfig& c, const std::string& v) { c.pretrain.mix_translate = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.pretrain.mix_translate); }},
      {"pretrain_mix_transcribe", [](RunConfig& c, const std::string& v) { c.pretrain.mix_transcribe = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.pretrain.mix_transcribe); }},
      {"pretrain_noise", [](RunConfig& c, const std::string& v) { c.pretrain.noise = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.pretrain.noise); }},
      {"pretrain_gate_acc", [](RunConfig& c, const std::string& v) { c.pretrain.gate_acc = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.pretrain.gate_acc); }},
      {"pretrain_abort_acc", [](RunConfig& c, const std::string& v) { c.pretrain.abort_acc = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.pretrain.abort_acc); }},
      {"pretrain_heldout", [](RunConfig& c, const std::string& v) { c.pretrain.heldout = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.pretrain.heldout); }},
      {"pretrain_eval_every", [](RunConfig& c, const std::string& v) { c.pretrain.eval_every = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.pretrain.eval_every); }},
      {"pretrain_seed", [](RunConfig& c, const std::string& v) { c.pretrain.data_seed = parse_u64(v); },
       [](const RunConfig& c) { return std::to_string(c.pretrain.data_seed); }},
      // adapters
      {"gating", [](RunConfig& c, const std::string& v) { c.adapter.gate = gate_strategy_from_string(v); },
       [](const RunConfig& c) { return to_string(c.adapter.gate); }},
      {"insertion", [](RunConfig& c, const std::string& v) { c.adapter.insertion = insertion_mode_from_string(v); },
       [](const RunConfig& c) { return to_string(c.adapter.insertion); }},
      {"adapter_r", [](RunConfig& c, const std::string& v) { c.adapter.r = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.adapter.r); }},
      {"gate_fixed_value", [](RunConfig& c, const std::string& v) { c.adapter.fixed_value = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.adapter.fixed_value); }},
      {"gate_random_mu", [](RunConfig& c, const std::string& v) { c.adapter.random_mu = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.adapter.random_mu); }},
      {"gate_random_sigma", [](RunConfig& c, const std::string& v) { c.adapter.random_sigma = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.adapter.random_sigma); }},
      {"model_seed", [](RunConfig& c, const std::string& v) { c.model_seed = parse_u64(v); },
       [](const RunConfig& c) { return std::to_string(c.model_seed); }},
      // staged training
      {"stage1_steps", [](RunConfig& c, const std::string& v) { c.stage1_steps = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.stage1_steps); }},
      {"stage2_steps", [](RunConfig& c, const std::string& v) { c.stage2_steps = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.stage2_steps); }},
      {"batch_size", [](RunConfig& c, const std::string& v) { c.batch_size = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.batch_size); }},
      {"stage1_lr", [](RunConfig& c, const std::string& v) { c.stage1_lr = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.stage1_lr); }},
      {"stage2_lr", [](RunConfig& c, const std::string& v) { c.stage2_lr = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.stage2_lr); }},
      {"warmup_frac", [](RunConfig& c, const std::string& v) { c.warmup_frac = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.warmup_frac); }},
      {"align_weight", [](RunConfig& c, const std::string& v) { c.align_weight = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.align_weight); }},
      {"lambda_itm", [](RunConfig& c, const std::string& v) { c.lambda_itm = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.lambda_itm); }},
      {"lambda_ttl", [](RunConfig& c, const std::string& v) { c.lambda_ttl = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.lambda_ttl); }},
      {"lambda_itl", [](RunConfig& c, const std::string& v) { c.lambda_itl = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.lambda_itl); }},
      {"itm_pool_frac", [](RunConfig& c, const std::string& v) { c.itm_pool_frac = parse_double(v); },
       [](const RunConfig& c) { return fmt_double(c.itm_pool_frac); }},
      {"itm_batch", [](RunConfig& c, const std::string& v) { c.itm_batch = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.itm_batch); }},
      {"train_seed", [](RunConfig& c, const std::string& v) { c.train_seed = parse_u64(v); },
       [](const RunConfig& c) { return std::to_string(c.train_seed); }},
      {"log_every", [](RunConfig& c, const std::string& v) { c.log_every = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.log_every); }},
      {"eval_n", [](RunConfig& c, const std::string& v) { c.eval_n = parse_int(v); },
       [](const RunConfig& c) { return std::to_string(c.eval_n); }},
  };
  return r;
}

}  // namespace

void RunConfig::finalize() {
  // dependent dimensions follow their sources
  backbone.vocab.base = task.vocab;
  backbone.n_slots = task.n_patches();
  fusion.d_sem = encoders.d_sem;
  fusion.d_det = encoders.d_det;
  fusion.d_llm = backbone.d_llm;
  adapter.n_layers = backbone.n_layers;
  adapter.d_llm = backbone.d_llm;

  if (task.l_max + 1 > task.n_patches())
    throw ConfigError("grid too small for the longest sequence");
  const int text_need = task.l_max * 2 + 4;  // text-only translation format
  if (backbone.max_pos < text_need)
    throw ConfigError("max_pos too small for the longest text sequence");
  if (lambda_itm < 0 || lambda_ttl < 0 || lambda_itl < 0)
    throw ConfigError("loss weights must be non-negative");
  if (batch_size <= 0 || itm_batch <= 0)
    throw ConfigError("batch sizes must be positive");
  if (stage1_steps < 0 || stage2_steps < 0)
    throw ConfigError("stage steps must be non-negative");
  if (itm_pool_frac <= 0.0 || itm_pool_frac > 1.0)
    throw ConfigError("itm_pool_frac must lie in (0, 1]");
  if (align_weight < 0) throw ConfigError("align_weight must be non-negative");
  if (eval_n <= 0) throw ConfigError("eval_n must be positive");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Entry& e : registry()) keys.push_back(e.key);
  return keys;
}

void config_set(RunConfig& cfg, const std::string& key,
                const std::string& value) {
  for (const Entry& e : registry()) {
    if (key == e.key) {
      e.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key: '" + key + "'");
}

void config_set_kv(RunConfig& cfg, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos)
    throw ConfigError("expected key=value, got '" + kv + "'");
  std::string key = kv.substr(0, eq);
  std::string value = kv.substr(eq + 1);
  auto trim = [](std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    const auto b = s.find_last_not_of(" \t");
    s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
  };
  trim(key);
  trim(value);
  if (key.empty()) throw ConfigError("empty config key in '" + kv + "'");
  config_set(cfg, key, value);
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    const auto b = line.find_last_not_of(" \t\r");
    try {
      config_set_kv(base, line.substr(a, b - a + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
  return base;
}

std::string dump_config(const RunConfig& cfg) {
  std::ostringstream os;
  for (const Entry& e : registry()) os << e.key << "=" << e.get(cfg) << "\n";
  return os.str();
}

}  // namespace ditra
