#include <doctest.h>

#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "ditra/error.hpp"
#include "ditra/task.hpp"

using namespace ditra;

namespace {

int count_ink(const std::vector<std::uint8_t>& bm, int patch, int qr, int qc) {
  int n = 0;
  for (int r = 0; r < patch / 2; ++r) {
    for (int c = 0; c < patch / 2; ++c) {
      n += bm[std::size_t(qr * patch / 2 + r) * patch + (qc * patch / 2 + c)];
    }
  }
  return n;
}

}  // namespace

TEST_CASE("glyphs: distinct bitmaps with uniform per-quadrant ink") {
  TaskConfig cfg;
  GlyphTable tab(cfg.vocab, cfg.patch, cfg.glyph_seed);
  CHECK(tab.vocab() == 32);

  std::set<std::vector<std::uint8_t>> seen;
  for (int t = 0; t < tab.vocab(); ++t) {
    const auto& bm = tab.bitmap(t);
    CHECK(bm.size() == std::size_t(cfg.patch * cfg.patch));
    for (int qr = 0; qr < 2; ++qr) {
      for (int qc = 0; qc < 2; ++qc) {
        CHECK(count_ink(bm, cfg.patch, qr, qc) ==
              GlyphTable::kInkPerQuadrant);
      }
    }
    seen.insert(bm);
  }
  CHECK(seen.size() == std::size_t(tab.vocab()));

  // frozen seed means frozen table
  GlyphTable again(cfg.vocab, cfg.patch, cfg.glyph_seed);
  for (int t = 0; t < tab.vocab(); ++t) CHECK(again.bitmap(t) == tab.bitmap(t));
}

TEST_CASE("ciphers: permutations, domain separation, invertibility") {
  CipherSpec spec = make_ciphers(32, 7);
  REQUIRE(spec.vocab == 32);
  std::set<int> a(spec.map_a.begin(), spec.map_a.end());
  std::set<int> b(spec.map_b.begin(), spec.map_b.end());
  CHECK(a.size() == 32);
  CHECK(b.size() == 32);
  CHECK(*a.begin() == 0);
  CHECK(*a.rbegin() == 31);

  // the two domain maps differ on at least 90% of tokens
  int differ = 0;
  for (int i = 0; i < 32; ++i) {
    differ += int(spec.map_a[std::size_t(i)] != spec.map_b[std::size_t(i)]);
  }
  CHECK(differ >= 29);

  std::vector<int> msg = {3, 1, 4, 1, 5, 9, 2, 6};
  for (Domain d : {Domain::A, Domain::B}) {
    std::vector<int> enc = apply_cipher(msg, d, spec);
    CHECK(enc.size() == msg.size());
    CHECK(invert_cipher(enc, d, spec) == msg);
  }
  CHECK(apply_cipher(msg, Domain::A, spec) !=
        apply_cipher(msg, Domain::B, spec));

  // deterministic in the seed
  CipherSpec spec2 = make_ciphers(32, 7);
  CHECK(spec2.map_a == spec.map_a);
  CHECK(spec2.map_b == spec.map_b);
}

TEST_CASE("samples pair a source with its domain-ciphered target") {
  SynthTask task(TaskConfig{}, 7);
  std::vector<int> src = {0, 9, 17, 31};
  Sample s = task.make_sample(src, Domain::B);
  CHECK(s.source == src);
  CHECK(s.domain == Domain::B);
  CHECK(s.target == apply_cipher(src, Domain::B, task.cipher()));
  CHECK(invert_cipher(s.target, Domain::B, task.cipher()) == src);
}

TEST_CASE("rendering: band encodes the domain, patches carry the glyphs") {
  TaskConfig cfg;
  SynthTask task(cfg, 7);
  std::vector<int> src = {5, 6, 7};

  Image ia = task.render(src, Domain::A);
  Image ib = task.render(src, Domain::B);
  CHECK(ia.h == cfg.image_h());
  CHECK(ia.w == cfg.image_w());

  for (int r = 0; r < cfg.band; ++r) {
    for (int c = 0; c < ia.w; ++c) {
      CHECK(ia.at(r, c) == cfg.band_a);
      CHECK(ib.at(r, c) == cfg.band_b);
    }
  }
  // below the band the two renders agree, pixel for pixel
  for (int r = cfg.band; r < ia.h; ++r) {
    for (int c = 0; c < ia.w; ++c) CHECK(ia.at(r, c) == ib.at(r, c));
  }

  // first patch equals glyph 5's bitmap, later slots are blank
  const auto& bm = task.glyphs().bitmap(5);
  for (int r = 0; r < cfg.patch; ++r) {
    for (int c = 0; c < cfg.patch; ++c) {
      CHECK(ia.at(cfg.band + r, c) == double(bm[std::size_t(r) * cfg.patch + c]));
    }
  }
  // slot 15 (row 3, col 3 of the grid) must be empty for a length-3 source
  int pr = cfg.band + 3 * cfg.patch, pc = 3 * cfg.patch;
  for (int r = 0; r < cfg.patch; ++r) {
    for (int c = 0; c < cfg.patch; ++c) CHECK(ia.at(pr + r, pc + c) == 0.0);
  }

  // deterministic
  Image ia2 = task.render(src, Domain::A);
  CHECK(ia2.px == ia.px);
}

TEST_CASE("datasets: sizes, bounds, distinct sources, determinism") {
  SynthTask task(TaskConfig{}, 7);
  Dataset d = gen_dataset(task, 11, 50, 20);
  CHECK(d.train.size() == 50);
  CHECK(d.test.size() == 20);

  std::set<std::vector<int>> sources;
  auto check_split = [&](const std::vector<Sample>& split) {
    for (const Sample& s : split) {
      CHECK(s.source.size() >= std::size_t(task.config().l_min));
      CHECK(s.source.size() <= std::size_t(task.config().l_max));
      for (int t : s.source) {
        CHECK(t >= 0);
        CHECK(t < task.config().vocab);
      }
      CHECK(s.target ==
            apply_cipher(s.source, s.domain, task.cipher()));
      sources.insert(s.source);
    }
  };
  check_split(d.train);
  check_split(d.test);
  CHECK(sources.size() == 70);  // pairwise distinct across both splits

  Dataset d2 = gen_dataset(task, 11, 50, 20);
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    CHECK(d2.train[i].source == d.train[i].source);
    CHECK(d2.train[i].domain == d.train[i].domain);
  }
  Dataset d3 = gen_dataset(task, 12, 50, 20);
  bool any_diff = false;
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    any_diff = any_diff || d3.train[i].source != d.train[i].source;
  }
  CHECK(any_diff);
}

TEST_CASE("sample files round-trip") {
  SynthTask task(TaskConfig{}, 7);
  Dataset d = gen_dataset(task, 11, 8, 1);
  std::string path = "test_samples_roundtrip.tsv";
  save_samples(path, d.train);
  std::vector<Sample> back = load_samples(path);
  REQUIRE(back.size() == d.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].source == d.train[i].source);
    CHECK(back[i].domain == d.train[i].domain);
    CHECK(back[i].target == d.train[i].target);
  }
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_samples("no_such_dir/nope.tsv"), ConfigError);
}

TEST_CASE("domain letters") {
  CHECK(domain_letter(Domain::A) == 'A');
  CHECK(domain_letter(Domain::B) == 'B');
  CHECK(domain_from_letter('A') == Domain::A);
  CHECK(domain_from_letter('B') == Domain::B);
  CHECK_THROWS_AS(domain_from_letter('C'), ConfigError);
}
