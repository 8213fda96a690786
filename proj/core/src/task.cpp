#include "ditra/task.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "ditra/error.hpp"

namespace ditra {

char domain_letter(Domain d) { return d == Domain::A ? 'A' : 'B'; }

Domain domain_from_letter(char c) {
  if (c == 'A') return Domain::A;
  if (c == 'B') return Domain::B;
  throw ConfigError(std::string("unknown domain letter '") + c + "'");
}

// ------------------------------------------------------------------ glyphs

GlyphTable::GlyphTable(int vocab, int patch, std::uint64_t seed)
    : patch_(patch) {
  if (vocab > kCapacity) {
    throw ConfigError("vocab " + std::to_string(vocab) +
                      " exceeds glyph table capacity " +
                      std::to_string(kCapacity));
  }
  if (patch % 2 != 0 || patch < 4) {
    throw ConfigError("glyph patch side must be even and >= 4, got " +
                      std::to_string(patch));
  }
  Rng rng(seed);
  const int q = patch / 2;  // quadrant side
  std::set<std::vector<std::uint8_t>> seen;
  while (int(glyphs_.size()) < vocab) {
    std::vector<std::uint8_t> g(std::size_t(patch) * patch, 0);
    for (int qr = 0; qr < 2; ++qr) {
      for (int qc = 0; qc < 2; ++qc) {
        std::vector<int> cells = rng.permutation(q * q);
        for (int k = 0; k < kInkPerQuadrant; ++k) {
          const int cell = cells[std::size_t(k)];
          const int r = qr * q + cell / q;
          const int c = qc * q + cell % q;
          g[std::size_t(r) * patch + c] = 1;
        }
      }
    }
    if (seen.insert(g).second) glyphs_.push_back(std::move(g));
  }
}

const std::vector<std::uint8_t>& GlyphTable::bitmap(int token) const {
  if (token < 0 || token >= vocab()) {
    throw ConfigError("glyph lookup for token " + std::to_string(token) +
                      " outside vocab " + std::to_string(vocab()));
  }
  return glyphs_[std::size_t(token)];
}

// ----------------------------------------------------------------- ciphers

CipherSpec make_ciphers(int vocab, std::uint64_t seed) {
  if (vocab < 2) throw ConfigError("cipher vocab must be >= 2");
  for (std::uint64_t s = seed;; ++s) {
    Rng rng(s);
    CipherSpec spec;
    spec.vocab = vocab;
    spec.map_a = rng.permutation(vocab);
    spec.map_b = rng.permutation(vocab);
    int differing = 0;
    for (int i = 0; i < vocab; ++i)
      if (spec.map_a[std::size_t(i)] != spec.map_b[std::size_t(i)]) ++differing;
    if (10 * differing >= 9 * vocab) {
      spec.seed = s;
      return spec;
    }
  }
}

std::vector<int> apply_cipher(const std::vector<int>& tokens, Domain d,
                              const CipherSpec& spec) {
  const std::vector<int>& m = d == Domain::A ? spec.map_a : spec.map_b;
  std::vector<int> out;
  out.reserve(tokens.size());
  for (int t : tokens) {
    if (t < 0 || t >= spec.vocab) {
      throw ConfigError("cipher input token " + std::to_string(t) +
                        " outside vocab " + std::to_string(spec.vocab));
    }
    out.push_back(m[std::size_t(t)]);
  }
  return out;
}

std::vector<int> invert_cipher(const std::vector<int>& tokens, Domain d,
                               const CipherSpec& spec) {
  const std::vector<int>& m = d == Domain::A ? spec.map_a : spec.map_b;
  std::vector<int> inv(std::size_t(spec.vocab));
  for (int i = 0; i < spec.vocab; ++i) inv[std::size_t(m[std::size_t(i)])] = i;
  std::vector<int> out;
  out.reserve(tokens.size());
  for (int t : tokens) {
    if (t < 0 || t >= spec.vocab) {
      throw ConfigError("cipher input token " + std::to_string(t) +
                        " outside vocab " + std::to_string(spec.vocab));
    }
    out.push_back(inv[std::size_t(t)]);
  }
  return out;
}

// -------------------------------------------------------------------- task

SynthTask::SynthTask(TaskConfig cfg, std::uint64_t seed)
    : cfg_(cfg),
      glyphs_(cfg.vocab, cfg.patch, cfg.glyph_seed),
      cipher_(make_ciphers(cfg.vocab, seed)) {
  if (cfg_.vocab < 8) throw ConfigError("task vocab must be >= 8");
  if (cfg_.l_max < 2 || cfg_.l_min < 1 || cfg_.l_min > cfg_.l_max) {
    throw ConfigError("invalid sequence length range [" +
                      std::to_string(cfg_.l_min) + "," +
                      std::to_string(cfg_.l_max) + "]");
  }
  if (cfg_.l_max + 1 > cfg_.n_patches()) {
    throw ConfigError("l_max " + std::to_string(cfg_.l_max) +
                      " needs more than the " +
                      std::to_string(cfg_.n_patches()) + " available patches");
  }
}

Image SynthTask::render(const std::vector<int>& source, Domain d) const {
  if (int(source.size()) > cfg_.l_max) {
    throw ConfigError("source length " + std::to_string(source.size()) +
                      " exceeds l_max " + std::to_string(cfg_.l_max));
  }
  Image img(cfg_.image_h(), cfg_.image_w(), 0.0);
  const double band = d == Domain::A ? cfg_.band_a : cfg_.band_b;
  for (int r = 0; r < cfg_.band; ++r)
    for (int c = 0; c < img.w; ++c) img.at(r, c) = band;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const std::vector<std::uint8_t>& g = glyphs_.bitmap(source[i]);
    const int pr = cfg_.band + int(i) / cfg_.grid * cfg_.patch;
    const int pc = int(i) % cfg_.grid * cfg_.patch;
    for (int r = 0; r < cfg_.patch; ++r)
      for (int c = 0; c < cfg_.patch; ++c)
        img.at(pr + r, pc + c) = g[std::size_t(r) * cfg_.patch + c] ? 1.0 : 0.0;
  }
  return img;
}

Sample SynthTask::make_sample(const std::vector<int>& source, Domain d) const {
  return Sample{source, d, apply_cipher(source, d, cipher_)};
}

// ----------------------------------------------------------------- dataset

Dataset gen_dataset(const SynthTask& task, std::uint64_t seed, int n_train,
                    int n_test) {
  if (n_test < 1) throw ConfigError("n_test must be >= 1");
  if (n_train < 1) throw ConfigError("n_train must be >= 1");
  const TaskConfig& cfg = task.config();
  Rng rng(seed);
  std::set<std::vector<int>> seen;
  auto draw = [&]() {
    while (true) {
      const int len = cfg.l_min + rng.next_int(cfg.l_max - cfg.l_min + 1);
      std::vector<int> s(static_cast<std::size_t>(len));
      for (int i = 0; i < len; ++i) s[std::size_t(i)] = rng.next_int(cfg.vocab);
      if (!seen.insert(s).second) continue;
      const Domain d = rng.next_int(2) == 0 ? Domain::A : Domain::B;
      return task.make_sample(s, d);
    }
  };
  Dataset ds;
  ds.train.reserve(std::size_t(n_train));
  ds.test.reserve(std::size_t(n_test));
  for (int i = 0; i < n_train; ++i) ds.train.push_back(draw());
  for (int i = 0; i < n_test; ++i) ds.test.push_back(draw());
  return ds;
}

// ----------------------------------------------------------------- file io

void save_samples(const std::string& path, const std::vector<Sample>& samples) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  for (const Sample& s : samples) {
    out << domain_letter(s.domain) << '\t';
    for (std::size_t i = 0; i < s.source.size(); ++i)
      out << (i ? " " : "") << s.source[i];
    out << '\t';
    for (std::size_t i = 0; i < s.target.size(); ++i)
      out << (i ? " " : "") << s.target[i];
    out << '\n';
  }
  if (!out) throw ConfigError("write to " + path + " failed");
}

std::vector<Sample> load_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<Sample> out;
  std::string line;
  int lineno = 0;
  auto parse_ids = [&](const std::string& field) {
    std::vector<int> ids;
    std::istringstream iss(field);
    int v;
    while (iss >> v) ids.push_back(v);
    if (!iss.eof()) {
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": malformed token list '" + field + "'");
    }
    return ids;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t1 != 1 || t2 == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected 'D<TAB>src<TAB>tgt'");
    }
    Sample s;
    s.domain = domain_from_letter(line[0]);
    s.source = parse_ids(line.substr(t1 + 1, t2 - t1 - 1));
    s.target = parse_ids(line.substr(t2 + 1));
    if (s.source.empty() || s.source.size() != s.target.size()) {
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": source/target length mismatch");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ditra
