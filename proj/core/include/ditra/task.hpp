#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ditra/rng.hpp"

namespace ditra {

struct TaskConfig {
  int vocab = 32;
  int l_min = 2;
  int l_max = 8;
  int grid = 4;   // patches per image side
  int patch = 8;  // pixels per patch side
  int band = 8;   // domain band height in pixels
  double band_a = 0.25;
  double band_b = 0.75;
  std::uint64_t glyph_seed = 0x474C5948;  // frozen glyph table seed

  int n_patches() const { return grid * grid; }
  int image_w() const { return grid * patch; }
  int image_h() const { return band + grid * patch; }
};

struct Image {
  int h = 0, w = 0;
  std::vector<double> px;  // row-major, values in [0,1]

  Image() = default;
  Image(int h_, int w_, double fill = 0.0)
      : h(h_), w(w_), px(std::size_t(h_) * std::size_t(w_), fill) {}
  double& at(int r, int c) { return px[std::size_t(r) * w + c]; }
  double at(int r, int c) const { return px[std::size_t(r) * w + c]; }
};

enum class Domain : int { A = 0, B = 1 };

char domain_letter(Domain d);
Domain domain_from_letter(char c);  // throws ConfigError on anything else

struct Sample {
  std::vector<int> source;
  Domain domain = Domain::A;
  std::vector<int> target;
};

// Fixed per-token bitmap table. Every glyph places exactly 6 ink pixels in
// each 4x4 quadrant, so 4x4 box-pooling is identical across glyphs while the
// bitmaps themselves stay pairwise distinct.
class GlyphTable {
 public:
  static constexpr int kCapacity = 256;
  static constexpr int kInkPerQuadrant = 6;

  GlyphTable(int vocab, int patch, std::uint64_t seed);

  const std::vector<std::uint8_t>& bitmap(int token) const;
  int vocab() const { return int(glyphs_.size()); }
  int patch() const { return patch_; }

 private:
  int patch_;
  std::vector<std::vector<std::uint8_t>> glyphs_;  // patch*patch, 0/1
};

struct CipherSpec {
  int vocab = 0;
  std::vector<int> map_a, map_b;  // permutations of [0, vocab)
  std::uint64_t seed = 0;         // the seed that finally produced the pair
};

// Draws permutation pairs from successive seeds until they differ on at
// least 90% of tokens.
CipherSpec make_ciphers(int vocab, std::uint64_t seed);

std::vector<int> apply_cipher(const std::vector<int>& tokens, Domain d,
                              const CipherSpec& spec);
std::vector<int> invert_cipher(const std::vector<int>& tokens, Domain d,
                               const CipherSpec& spec);

class SynthTask {
 public:
  SynthTask(TaskConfig cfg, std::uint64_t seed);

  const TaskConfig& config() const { return cfg_; }
  const GlyphTable& glyphs() const { return glyphs_; }
  const CipherSpec& cipher() const { return cipher_; }

  Image render(const std::vector<int>& source, Domain d) const;
  Sample make_sample(const std::vector<int>& source, Domain d) const;

 private:
  TaskConfig cfg_;
  GlyphTable glyphs_;
  CipherSpec cipher_;
};

struct Dataset {
  std::vector<Sample> train, test;
};

// Uniform sources/domains, all source sequences pairwise distinct across
// both splits; deterministic in (task seed, gen seed).
Dataset gen_dataset(const SynthTask& task, std::uint64_t seed, int n_train,
                    int n_test);

// One record per line: domain letter, TAB, source ids space-separated, TAB,
// target ids space-separated.
void save_samples(const std::string& path, const std::vector<Sample>& samples);
std::vector<Sample> load_samples(const std::string& path);

}  // namespace ditra
