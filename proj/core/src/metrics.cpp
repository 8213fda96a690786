#include "ditra/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>

#include "ditra/error.hpp"

namespace ditra {

namespace {
void check_pairs(const std::vector<TokenSeq>& hyps,
                 const std::vector<TokenSeq>& refs) {
  if (hyps.size() != refs.size())
    throw ShapeError("metric needs one hypothesis per reference");
  if (refs.empty()) throw ShapeError("metric needs at least one pair");
}

// clipped n-gram matches and hypothesis n-gram total for one pair
void ngram_stats(const TokenSeq& hyp, const TokenSeq& ref, int n,
                 long long* match, long long* total) {
  const long long h = static_cast<long long>(hyp.size()) - n + 1;
  *total += std::max(0LL, h);
  if (h <= 0 || static_cast<int>(ref.size()) < n) return;
  std::map<TokenSeq, int> ref_counts;
  for (std::size_t i = 0; i + n <= ref.size(); ++i)
    ++ref_counts[TokenSeq(ref.begin() + i, ref.begin() + i + n)];
  std::map<TokenSeq, int> hyp_counts;
  for (std::size_t i = 0; i + n <= hyp.size(); ++i)
    ++hyp_counts[TokenSeq(hyp.begin() + i, hyp.begin() + i + n)];
  for (const auto& [gram, c] : hyp_counts) {
    auto it = ref_counts.find(gram);
    if (it != ref_counts.end()) *match += std::min(c, it->second);
  }
}
}  // namespace

BleuBreakdown corpus_bleu_breakdown(const std::vector<TokenSeq>& hyps,
                                    const std::vector<TokenSeq>& refs) {
  check_pairs(hyps, refs);
  BleuBreakdown out;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    out.hyp_len += static_cast<long long>(hyps[i].size());
    out.ref_len += static_cast<long long>(refs[i].size());
  }
  if (out.hyp_len == 0) return out;  // nothing emitted anywhere

  double log_sum = 0.0;
  bool zero = false;
  for (int n = 1; n <= 4; ++n) {
    long long match = 0, total = 0;
    for (std::size_t i = 0; i < hyps.size(); ++i)
      ngram_stats(hyps[i], refs[i], n, &match, &total);
    double p;
    if (n == 1) {
      p = total > 0 ? double(match) / double(total) : 0.0;
    } else {
      p = double(match + 1) / double(total + 1);
    }
    out.precisions[static_cast<std::size_t>(n) - 1] = p;
    if (p <= 0.0)
      zero = true;
    else
      log_sum += std::log(p);
  }
  out.brevity_penalty =
      out.hyp_len < out.ref_len
          ? std::exp(1.0 - double(out.ref_len) / double(out.hyp_len))
          : 1.0;
  out.bleu = zero ? 0.0
                  : 100.0 * out.brevity_penalty * std::exp(log_sum / 4.0);
  return out;
}

double corpus_bleu(const std::vector<TokenSeq>& hyps,
                   const std::vector<TokenSeq>& refs) {
  return corpus_bleu_breakdown(hyps, refs).bleu;
}

int edit_distance(const TokenSeq& a, const TokenSeq& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = int(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = int(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double corpus_cer(const std::vector<TokenSeq>& hyps,
                  const std::vector<TokenSeq>& refs) {
  check_pairs(hyps, refs);
  long long dist = 0, ref_len = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    dist += edit_distance(hyps[i], refs[i]);
    ref_len += static_cast<long long>(refs[i].size());
  }
  if (ref_len == 0) throw ShapeError("references are all empty");
  return double(dist) / double(ref_len);
}

double token_accuracy(const std::vector<TokenSeq>& hyps,
                      const std::vector<TokenSeq>& refs) {
  check_pairs(hyps, refs);
  long long ok = 0, tot = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    // positions past either end are mismatches, so 1.0 implies exact match
    std::size_t span = std::max(hyps[i].size(), refs[i].size());
    for (std::size_t j = 0; j < span; ++j) {
      ok += int(j < hyps[i].size() && j < refs[i].size() &&
                hyps[i][j] == refs[i][j]);
      ++tot;
    }
  }
  if (tot == 0) throw ShapeError("references are all empty");
  return double(ok) / double(tot);
}

double exact_match(const std::vector<TokenSeq>& hyps,
                   const std::vector<TokenSeq>& refs) {
  check_pairs(hyps, refs);
  long long ok = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) ok += int(hyps[i] == refs[i]);
  return double(ok) / double(hyps.size());
}

NumericAccuracy numeric_accuracy(const std::vector<TokenSeq>& hyps,
                                 const std::vector<TokenSeq>& refs,
                                 int numeric_limit) {
  check_pairs(hyps, refs);
  long long ok = 0, tot = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    for (std::size_t j = 0; j < refs[i].size(); ++j) {
      if (refs[i][j] < 0 || refs[i][j] >= numeric_limit) continue;
      ok += int(j < hyps[i].size() && hyps[i][j] == refs[i][j]);
      ++tot;
    }
  }
  NumericAccuracy out;
  if (tot == 0) {
    out.vacuous = true;
    out.value = 1.0;
  } else {
    out.value = double(ok) / double(tot);
  }
  return out;
}

}  // namespace ditra
