#pragma once

// Fixed metric test cases shared by the unit tests and the acceptance
// checks.  Each BLEU case is a whole corpus (hypotheses + references);
// edit-distance cases are single pairs.

#include <vector>

namespace metric_cases {

using Seq = std::vector<int>;
using Corpus = std::vector<Seq>;

struct BleuCase {
  Corpus hyps;
  Corpus refs;
};

inline const std::vector<BleuCase>& bleu_cases() {
  static const std::vector<BleuCase> cases = {
      {{{0, 1, 2, 3}}, {{0, 1, 2, 3, 4}}},
      {{{0, 1, 2, 3, 4}}, {{0, 1, 2, 3, 4}}},
      {{{5, 1, 2, 9}}, {{0, 1, 2, 3}}},
      {{{0, 1}, {2, 3, 4}}, {{0, 1, 9}, {2, 3, 4}}},
      {{{7, 7, 7, 7, 7}}, {{7, 7}}},
      {{{}, {1, 2, 3}}, {{4, 5}, {1, 2, 3}}},
      {{{3, 1, 4, 1, 5, 9, 2, 6}}, {{3, 1, 4, 1, 5, 8, 2, 6}}},
      {{{1, 2, 3, 4, 5, 6}}, {{6, 5, 4, 3, 2, 1}}},
      {{{1, 0, 1, 9, 0, 1, 1}, {9, 7, 2, 1, 2, 1, 0}, {9}},
       {{5, 3, 0, 0, 0, 5, 9}, {7, 3, 1, 8, 7}, {1, 8, 9, 0, 4, 8}}},
      {{{4}, {8, 0, 8, 1, 0, 5, 2}, {2, 1, 8, 3, 2, 0, 5}},
       {{5, 4, 3, 3}, {7, 6, 2, 0, 1, 9}, {1, 8, 2, 4, 7, 0, 6}}},
      {{{0, 2, 4, 2}, {5, 7, 5, 9, 7, 7}, {7, 8}},
       {{2, 7, 0}, {7}, {7, 4, 4, 1, 2, 6, 6}}},
      {{{8}, {4, 3, 5, 1, 2, 9}, {1}}, {{7}, {2, 5, 7}, {3, 0, 4, 0}}},
      {{{0}}, {{0}}},
      {{{0, 0, 0, 0}}, {{0, 0, 0, 0, 0, 0, 0, 0}}},
      {{{}}, {{1, 2, 3}}},
      {{{2, 4, 6, 8, 10, 12}}, {{2, 4, 6, 8, 10, 12}}},
      {{{1, 2, 3, 4}, {5, 6}, {7, 8, 9}}, {{1, 2, 3, 4}, {5, 6}, {7, 8, 9}}},
      {{{9, 9, 9, 9, 9, 9, 9, 9}}, {{9, 9, 9}}},
      {{{3, 3, 1, 4}, {}}, {{3, 1, 4, 1}, {2, 2}}},
      {{{11, 12, 13, 14, 15}}, {{11, 12, 0, 14, 15}}},
      {{{1, 2}, {3, 4}, {5, 6}, {7, 8}},
       {{2, 1}, {3, 4}, {6, 5}, {7, 8}}},
      {{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}}, {{0, 1, 2, 3, 9, 5, 6, 7, 8, 4}}},
      {{{1, 1, 2, 2, 3, 3}}, {{1, 2, 3, 1, 2, 3}}},
      {{{6, 5, 4}, {1}, {2, 2, 2, 2}}, {{6, 5, 4, 3}, {1, 1}, {2, 2}}},
  };
  return cases;
}

struct EdCase {
  Seq a;
  Seq b;
};

inline const std::vector<EdCase>& ed_cases() {
  // letters written as 0-based alphabet indices
  static const std::vector<EdCase> cases = {
      {{0, 1, 2}, {0, 1, 3}},                      // abc/abd
      {{}, {0, 1, 2}},                             // ""/abc
      {{10, 8, 19, 19, 4, 13}, {18, 8, 19, 19, 8, 13, 6}},  // kitten/sitting
      {{5, 11, 0, 22}, {11, 0, 22, 13}},           // flaw/lawn
      {{0, 0, 0, 0}, {0, 0}},                      // aaaa/aa
      {{0, 1, 2, 3, 4, 5}, {0, 1, 2, 3, 4, 5}},    // identical
      {{0, 1}, {1, 0}},                            // ab/ba
      {{23, 24, 25}, {}},                          // xyz/""
      {{2, 1, 1, 1}, {2}},
      {{4, 4, 1, 1, 4, 5, 5}, {0, 2, 0, 3, 1, 1, 4, 3}},
      {{2, 2}, {0}},
      {{2, 4, 3, 1, 1, 1, 0, 0}, {5, 4, 3}},
      {{0, 0, 5, 5, 1, 5, 2, 0}, {4}},
      {{0, 4, 0, 2, 3, 5, 4}, {2}},
      {{}, {}},
      {{7}, {7}},
      {{7}, {8}},
      {{1, 2, 3, 4, 5}, {1, 3, 5}},
      {{9, 8, 7, 6}, {6, 7, 8, 9}},
      {{5, 5, 5, 5, 5, 5, 5, 5}, {5, 5, 5, 5}},
      {{1, 2, 1, 2, 1, 2}, {2, 1, 2, 1, 2, 1}},
      {{3, 0, 3}, {0, 3, 0}},
      {{6, 1, 6, 1}, {6, 6, 6, 6}},
      {{0, 1, 2, 3, 4, 5, 6, 7}, {7, 6, 5, 4, 3, 2, 1, 0}},
  };
  return cases;
}

// CER corpora: hypothesis set + reference set, scored as a whole.
inline const std::vector<BleuCase>& cer_cases() {
  static const std::vector<BleuCase> cases = {
      {{{0, 1, 2}, {3, 3}, {5}}, {{0, 1, 3}, {3, 4, 5}, {5}}},
      {{{1, 2, 3}}, {{1, 2, 3}}},
      {{{}}, {{4, 4, 4, 4}}},
      {{{9, 9, 9, 9}}, {{9}}},
      {{{0, 1}, {2, 3}}, {{1, 0}, {2, 3}}},
      {{{5, 6, 7, 8}, {}}, {{5, 6, 7, 8}, {1}}},
      {{{2, 2, 2}, {3}}, {{2}, {3, 3, 3}}},
      {{{1, 3, 5, 7, 9}}, {{1, 3, 5, 7, 9, 11}}},
      {{{4, 5, 6}, {7, 8, 9}, {1, 2, 3}}, {{4, 5, 6}, {9, 8, 7}, {1, 2, 3}}},
      {{{0}, {0}, {0}}, {{1}, {2}, {3}}},
      {{{6, 6}, {7, 7}, {8, 8}}, {{6, 6, 6}, {7}, {8, 8}}},
      {{{1, 2, 3, 4, 5, 6, 7, 8}}, {{1, 2, 3, 4}}},
      {{{3, 1, 4}, {1, 5, 9, 2}}, {{3, 1, 4, 1}, {5, 9, 2}}},
      {{{2, 4, 6}, {8, 10, 12}}, {{2, 4, 6}, {8, 10, 12}}},
      {{{9, 0, 9, 0}}, {{0, 9, 0, 9}}},
      {{{5}}, {{5, 5, 5, 5, 5}}},
      {{{1, 1, 1, 1, 1}}, {{1}}},
      {{{0, 2, 4}, {1, 3, 5}}, {{0, 2, 5}, {1, 3, 4}}},
      {{{7, 7, 7}, {}}, {{7, 7, 7}, {7, 7, 7}}},
      {{{1, 2}, {3, 4}, {5, 6}, {7, 8}}, {{1, 2}, {4, 3}, {5, 6}, {8, 7}}},
      {{{8, 6, 4, 2, 0}}, {{8, 6, 4, 2, 0}}},
      {{{3, 3, 3}, {4, 4, 4}}, {{3, 4, 3}, {4, 3, 4}}},
  };
  return cases;
}

}  // namespace metric_cases
