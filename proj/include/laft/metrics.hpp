#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace laft {

using Words = std::vector<std::string>;

struct EvalPair {
  Words candidate;
  std::vector<Words> references;  // at least one
};

/// Corpus-level BLEU counts for orders 1..4.
struct BleuStats {
  std::array<double, 4> matched{};  // clipped n-gram matches
  std::array<double, 4> total{};    // candidate n-grams
  double candidate_length = 0.0;
  double reference_length = 0.0;  // closest reference length, summed (shorter on ties)

  double precision(int n) const { return total[n - 1] > 0 ? matched[n - 1] / total[n - 1] : 0.0; }
  double brevity_penalty() const;
};

BleuStats bleu_stats(std::span<const EvalPair> pairs);
/// Geometric mean of p_1..p_n times the brevity penalty; 0 if any p_k is 0.
double bleu(std::span<const EvalPair> pairs, int n);
double bleu(const BleuStats& stats, int n);

std::size_t lcs_length(const Words& a, const Words& b);
/// Max over references of the LCS F-measure with beta = 1.2, mean over pairs.
double rouge_l(std::span<const EvalPair> pairs, double beta = 1.2);

/// CIDEr-D (sigma = 6, clipped tf-idf, x10), mean over pairs. Document
/// frequencies come from the references of `pairs`; throws
/// std::invalid_argument("IDF undefined ...") for fewer than two pairs.
double cider_d(std::span<const EvalPair> pairs, double sigma = 6.0);
std::vector<double> cider_d_per_pair(std::span<const EvalPair> pairs, double sigma = 6.0);

struct MetricReport {
  std::array<double, 4> bleu{};
  double rouge_l = 0.0;
  double cider_d = 0.0;  // NaN for a single-pair corpus
};
MetricReport evaluate_all(std::span<const EvalPair> pairs);

}  // namespace laft
