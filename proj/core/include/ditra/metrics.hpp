#pragma once

#include <array>
#include <vector>

namespace ditra {

using TokenSeq = std::vector<int>;

struct BleuBreakdown {
  double bleu = 0.0;  // [0, 100]
  std::array<double, 4> precisions{0, 0, 0, 0};
  double brevity_penalty = 1.0;
  long long hyp_len = 0, ref_len = 0;
};

// Corpus 4-gram BLEU with clipped counts, add-one smoothing on orders >= 2,
// and the exponential brevity penalty. All-empty hypotheses score 0.
BleuBreakdown corpus_bleu_breakdown(const std::vector<TokenSeq>& hyps,
                                    const std::vector<TokenSeq>& refs);
double corpus_bleu(const std::vector<TokenSeq>& hyps,
                   const std::vector<TokenSeq>& refs);

// unit-cost Levenshtein distance
int edit_distance(const TokenSeq& a, const TokenSeq& b);

// corpus character-error-rate analog: summed edit distance over summed
// reference length
double corpus_cer(const std::vector<TokenSeq>& hyps,
                  const std::vector<TokenSeq>& refs);

// positional accuracy over max(|hyp|, |ref|) positions per pair, so a
// perfect score is only possible on exact matches
double token_accuracy(const std::vector<TokenSeq>& hyps,
                      const std::vector<TokenSeq>& refs);

double exact_match(const std::vector<TokenSeq>& hyps,
                   const std::vector<TokenSeq>& refs);

struct NumericAccuracy {
  double value = 1.0;
  bool vacuous = false;  // no reference position carried a numeric token
};

// positional accuracy restricted to reference positions whose token id is
// below numeric_limit (the digit-analog slice of the alphabet)
NumericAccuracy numeric_accuracy(const std::vector<TokenSeq>& hyps,
                                 const std::vector<TokenSeq>& refs,
                                 int numeric_limit = 8);

}  // namespace ditra
