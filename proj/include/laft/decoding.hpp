#pragma once

#include "laft/model.hpp"
#include "laft/vocab.hpp"

#include <functional>
#include <span>
#include <vector>

namespace laft {

/// Next-token log-probabilities [P, V] for each prefix (each starts with <sos>).
using StepFn = std::function<RowMatrix(std::span<const std::vector<TokenId>> prefixes)>;

struct Hypothesis {
  std::vector<TokenId> tokens;  // starts with <sos>
  double log_prob = 0.0;
  bool finished = false;  // ended with <eos>

  /// Generated tokens after <sos>, <eos> included.
  Index length() const { return static_cast<Index>(tokens.size()) - 1; }
  /// Length-normalized score used for final ranking.
  double score() const { return length() > 0 ? log_prob / static_cast<double>(length()) : log_prob; }
};

/// Appends the argmax token (lowest id on ties; <pad> and <sos> never chosen)
/// until <eos> or `max_len` generated tokens.
Hypothesis greedy_decode(const StepFn& step, Index max_len);

struct BeamResult {
  Hypothesis best;
  /// Finished hypotheses by descending score, at most k; the live beam if
  /// nothing finished.
  std::vector<Hypothesis> kbest;
};

/// Keeps the k best (hypothesis, token) extensions by cumulative log-prob at
/// every step; hypotheses that emit <eos> are set aside. Ties prefer the
/// earlier hypothesis, then the lower token id, so k = 1 matches greedy.
BeamResult beam_decode(const StepFn& step, Index k, Index max_len);

/// Step function of a trained model for one clip; `h` is [1, L, D].
StepFn model_step_fn(const CaptionModel& model, const Tensor& h);

/// Encodes one clip (eval mode) into [1, L, D].
Tensor clip_features(CaptionModel& model, const RowMatrix& features);

}  // namespace laft
