#include <doctest.h>

#include <cmath>

#include "ditra/metrics.hpp"
#include "ditra/rng.hpp"

#include "metric_cases.hpp"
#include "oracle_support.hpp"

using namespace ditra;

TEST_CASE("corpus BLEU matches the brute-force oracle on every fixed case") {
  const auto& cases = metric_cases::bleu_cases();
  CHECK(cases.size() >= 20);
  for (const auto& c : cases) {
    double got = corpus_bleu(c.hyps, c.refs);
    double want = oracle::bf_bleu(c.hyps, c.refs);
    CHECK(std::fabs(got - want) < 1e-9);
  }
}

TEST_CASE("corpus BLEU matches values frozen from a reference run") {
  struct Pin {
    int idx;
    double value;
  };
  // indices into metric_cases::bleu_cases()
  const Pin pins[] = {
      {0, 77.880078307140},  {1, 100.0},
      {2, 45.180100180492},  {3, 81.873075307798},
      {4, 33.980884896942},  {5, 51.341711903259},
      {6, 65.803700647625},  {7, 30.213753973568},
      {8, 10.870798974225},  {9, 14.849321604999},
      {10, 17.567205239428}, {11, 21.364350319812},
  };
  const auto& cases = metric_cases::bleu_cases();
  for (const auto& p : pins) {
    double got = corpus_bleu(cases[std::size_t(p.idx)].hyps,
                             cases[std::size_t(p.idx)].refs);
    CHECK(got == doctest::Approx(p.value).epsilon(1e-9));
  }
}

TEST_CASE("BLEU structural properties") {
  std::vector<TokenSeq> same = {{4, 8, 15, 16, 23, 42}, {1, 2}};
  CHECK(corpus_bleu(same, same) == doctest::Approx(100.0));

  // all-empty hypotheses score zero
  CHECK(corpus_bleu({{}, {}}, {{1, 2}, {3}}) == 0.0);

  BleuBreakdown b =
      corpus_bleu_breakdown({{0, 1, 2, 3}}, {{0, 1, 2, 3, 4}});
  CHECK(b.hyp_len == 4);
  CHECK(b.ref_len == 5);
  CHECK(b.precisions[0] == doctest::Approx(1.0));
  CHECK(b.brevity_penalty == doctest::Approx(std::exp(1.0 - 5.0 / 4.0)));

  // no brevity penalty when the hypothesis is at least as long
  BleuBreakdown b2 = corpus_bleu_breakdown({{0, 1, 2, 3, 4, 5}}, {{0, 1, 2}});
  CHECK(b2.brevity_penalty == 1.0);

  // any zero first-order precision zeroes the score
  CHECK(corpus_bleu({{9, 9, 9}}, {{1, 2, 3}}) == 0.0);
}

TEST_CASE("BLEU on randomized corpora agrees with the oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TokenSeq> hyps, refs;
    int n = 1 + rng.next_int(4);
    for (int i = 0; i < n; ++i) {
      TokenSeq h(std::size_t(rng.next_int(9)));
      TokenSeq r(std::size_t(1 + rng.next_int(8)));
      for (int& t : h) t = rng.next_int(6);
      for (int& t : r) t = rng.next_int(6);
      hyps.push_back(h);
      refs.push_back(r);
    }
    double got = corpus_bleu(hyps, refs);
    double want = oracle::bf_bleu(hyps, refs);
    CHECK(std::fabs(got - want) < 1e-9);
  }
}

TEST_CASE("edit distance matches recursive oracle on every fixed case") {
  const auto& cases = metric_cases::ed_cases();
  CHECK(cases.size() >= 20);
  for (const auto& c : cases) {
    CHECK(edit_distance(c.a, c.b) == oracle::ed_recursive(c.a, c.b));
  }
}

TEST_CASE("edit distance frozen values") {
  const auto& c = metric_cases::ed_cases();
  const int want[] = {1, 3, 3, 2, 2, 0, 2, 3, 3, 6, 2, 6, 8, 6,
                      0, 0, 1, 2, 4, 4, 2, 2, 2, 8};
  REQUIRE(c.size() == std::size_t(std::size(want)));
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(edit_distance(c[i].a, c[i].b) == want[i]);
  }
}

TEST_CASE("edit distance is symmetric and respects the triangle inequality") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    TokenSeq a(std::size_t(rng.next_int(10)));
    TokenSeq b(std::size_t(rng.next_int(10)));
    TokenSeq c(std::size_t(rng.next_int(10)));
    for (int& t : a) t = rng.next_int(4);
    for (int& t : b) t = rng.next_int(4);
    for (int& t : c) t = rng.next_int(4);
    CHECK(edit_distance(a, b) == edit_distance(b, a));
    CHECK(edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c));
    CHECK(edit_distance(a, a) == 0);
  }
}

TEST_CASE("corpus CER matches summed-oracle ratio on every fixed case") {
  const auto& cases = metric_cases::cer_cases();
  CHECK(cases.size() >= 20);
  for (const auto& c : cases) {
    long long dist = 0, len = 0;
    for (std::size_t i = 0; i < c.hyps.size(); ++i) {
      dist += oracle::ed_recursive(c.hyps[i], c.refs[i]);
      len += (long long)c.refs[i].size();
    }
    double want = len == 0 ? 0.0 : double(dist) / double(len);
    CHECK(corpus_cer(c.hyps, c.refs) == doctest::Approx(want).epsilon(1e-9));
  }
  // frozen spot value for the first case: 3 edits over 7 reference tokens
  CHECK(corpus_cer(cases[0].hyps, cases[0].refs) ==
        doctest::Approx(3.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("token accuracy and exact match invariants") {
  std::vector<TokenSeq> hyps = {{1, 2, 3}, {4, 5}};
  std::vector<TokenSeq> refs = {{1, 2, 3}, {4, 5}};
  CHECK(token_accuracy(hyps, refs) == 1.0);
  CHECK(exact_match(hyps, refs) == 1.0);

  // a longer hypothesis must not score a perfect token accuracy
  std::vector<TokenSeq> longer = {{1, 2, 3, 9}, {4, 5}};
  CHECK(token_accuracy(longer, refs) < 1.0);
  CHECK(exact_match(longer, refs) == 0.5);

  std::vector<TokenSeq> shorter = {{1, 2}, {4, 5}};
  CHECK(token_accuracy(shorter, refs) < 1.0);

  // positional scoring: one wrong position out of five scored
  std::vector<TokenSeq> off = {{1, 9, 3}, {4, 5}};
  CHECK(token_accuracy(off, refs) == doctest::Approx(4.0 / 5.0));

  // perfect token accuracy if and only if exact match, over random corpora
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    TokenSeq h(std::size_t(rng.next_int(5)));
    TokenSeq r(std::size_t(rng.next_int(5)));
    for (int& t : h) t = rng.next_int(3);
    for (int& t : r) t = rng.next_int(3);
    bool acc_perfect = token_accuracy({h}, {r}) == 1.0;
    bool exact = exact_match({h}, {r}) == 1.0;
    CHECK(acc_perfect == exact);
  }
}

TEST_CASE("numeric accuracy scores only the digit-analog positions") {
  // limit 8: ids 0..7 count as numeric
  std::vector<TokenSeq> refs = {{2, 9, 5}, {8, 8}};
  std::vector<TokenSeq> hyps = {{2, 9, 6}, {8, 8}};
  NumericAccuracy na = numeric_accuracy(hyps, refs, 8);
  CHECK(!na.vacuous);
  // numeric reference positions: 2 and 5 in the first pair; hit 2, miss 5
  CHECK(na.value == doctest::Approx(0.5));

  // a missing position counts as wrong
  NumericAccuracy nb = numeric_accuracy({{2}}, {{2, 3}}, 8);
  CHECK(nb.value == doctest::Approx(0.5));

  // vacuous when no reference token is numeric
  NumericAccuracy nc = numeric_accuracy({{9}}, {{9, 10}}, 8);
  CHECK(nc.vacuous);
  CHECK(nc.value == 1.0);
}
