#include "laft/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace laft {
namespace {

using Ngram = std::vector<std::string>;
using Counts = std::map<Ngram, double>;

Counts ngram_counts(const Words& w, std::size_t n) {
  Counts c;
  for (std::size_t i = 0; i + n <= w.size(); ++i) c[Ngram(w.begin() + static_cast<std::ptrdiff_t>(i), w.begin() + static_cast<std::ptrdiff_t>(i + n))] += 1.0;
  return c;
}

void check_pairs(std::span<const EvalPair> pairs) {
  for (const auto& p : pairs)
    if (p.references.empty()) throw std::invalid_argument("every evaluation pair needs at least one reference");
}

}  // namespace

double BleuStats::brevity_penalty() const {
  if (candidate_length <= 0) return 0.0;
  return std::min(1.0, std::exp(1.0 - reference_length / candidate_length));
}

BleuStats bleu_stats(std::span<const EvalPair> pairs) {
  check_pairs(pairs);
  BleuStats s;
  for (const auto& p : pairs) {
    const auto c = static_cast<double>(p.candidate.size());
    s.candidate_length += c;
    double closest = std::numeric_limits<double>::infinity();
    for (const auto& r : p.references) {
      const auto rl = static_cast<double>(r.size());
      if (std::abs(rl - c) < std::abs(closest - c) || (std::abs(rl - c) == std::abs(closest - c) && rl < closest))
        closest = rl;
    }
    s.reference_length += closest;
    for (std::size_t n = 1; n <= 4; ++n) {
      const Counts cand = ngram_counts(p.candidate, n);
      Counts max_ref;
      for (const auto& r : p.references)
        for (const auto& [g, k] : ngram_counts(r, n)) max_ref[g] = std::max(max_ref[g], k);
      for (const auto& [g, k] : cand) {
        const auto it = max_ref.find(g);
        s.matched[n - 1] += std::min(k, it == max_ref.end() ? 0.0 : it->second);
        s.total[n - 1] += k;
      }
    }
  }
  return s;
}

double bleu(const BleuStats& s, int n) {
  if (n < 1 || n > 4) throw std::invalid_argument("BLEU order must be in 1..4");
  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const double p = s.precision(k);
    if (p <= 0.0) return 0.0;
    log_sum += std::log(p);
  }
  return s.brevity_penalty() * std::exp(log_sum / n);
}

double bleu(std::span<const EvalPair> pairs, int n) { return bleu(bleu_stats(pairs), n); }

std::size_t lcs_length(const Words& a, const Words& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::span<const EvalPair> pairs, double beta) {
  check_pairs(pairs);
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : pairs) {
    double best = 0.0;
    for (const auto& r : p.references) {
      const auto lcs = static_cast<double>(lcs_length(p.candidate, r));
      if (lcs == 0.0) continue;
      const double prec = lcs / static_cast<double>(p.candidate.size());
      const double rec = lcs / static_cast<double>(r.size());
      best = std::max(best, (1 + beta * beta) * prec * rec / (rec + beta * beta * prec));
    }
    total += best;
  }
  return total / static_cast<double>(pairs.size());
}

std::vector<double> cider_d_per_pair(std::span<const EvalPair> pairs, double sigma) {
  check_pairs(pairs);
  if (pairs.size() < 2) throw std::invalid_argument("IDF undefined: CIDEr-D needs at least two clips");
  constexpr std::size_t kOrders = 4;
  std::map<Ngram, double> df;
  for (const auto& p : pairs) {
    std::set<Ngram> seen;
    for (const auto& r : p.references)
      for (std::size_t n = 1; n <= kOrders; ++n)
        for (const auto& [g, _] : ngram_counts(r, n)) seen.insert(g);
    for (const auto& g : seen) df[g] += 1.0;
  }
  const double log_docs = std::log(static_cast<double>(pairs.size()));

  struct Vec {
    std::array<std::map<Ngram, double>, kOrders> w;
    std::array<double, kOrders> norm{};
    double length = 0.0;
  };
  auto vectorize = [&](const Words& s) {
    Vec v;
    v.length = static_cast<double>(s.size());
    for (std::size_t n = 1; n <= kOrders; ++n) {
      for (const auto& [g, tf] : ngram_counts(s, n)) {
        const auto it = df.find(g);
        const double idf = log_docs - std::log(std::max(1.0, it == df.end() ? 0.0 : it->second));
        const double x = tf * idf;
        v.w[n - 1][g] = x;
        v.norm[n - 1] += x * x;
      }
      v.norm[n - 1] = std::sqrt(v.norm[n - 1]);
    }
    return v;
  };
  auto similarity = [&](const Vec& c, const Vec& r) {
    const double delta = c.length - r.length;
    const double penalty = std::exp(-(delta * delta) / (2.0 * sigma * sigma));
    std::array<double, kOrders> val{};
    for (std::size_t n = 0; n < kOrders; ++n) {
      for (const auto& [g, x] : c.w[n]) {
        const auto it = r.w[n].find(g);
        if (it != r.w[n].end()) val[n] += std::min(x, it->second) * it->second;
      }
      if (c.norm[n] != 0.0 && r.norm[n] != 0.0) val[n] /= c.norm[n] * r.norm[n];
      val[n] *= penalty;
    }
    return val;
  };

  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    const Vec c = vectorize(p.candidate);
    std::array<double, kOrders> acc{};
    for (const auto& r : p.references) {
      const auto val = similarity(c, vectorize(r));
      for (std::size_t n = 0; n < kOrders; ++n) acc[n] += val[n];
    }
    double mean = 0.0;
    for (double a : acc) mean += a / static_cast<double>(kOrders);
    out.push_back(mean / static_cast<double>(p.references.size()) * 10.0);
  }
  return out;
}

double cider_d(std::span<const EvalPair> pairs, double sigma) {
  const auto scores = cider_d_per_pair(pairs, sigma);
  double s = 0.0;
  for (double v : scores) s += v;
  return s / static_cast<double>(scores.size());
}

MetricReport evaluate_all(std::span<const EvalPair> pairs) {
  MetricReport r;
  const BleuStats s = bleu_stats(pairs);
  for (int n = 1; n <= 4; ++n) r.bleu[static_cast<std::size_t>(n - 1)] = bleu(s, n);
  r.rouge_l = rouge_l(pairs);
  r.cider_d = pairs.size() >= 2 ? cider_d(pairs) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

}  // namespace laft
