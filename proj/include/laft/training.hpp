#pragma once

#include "laft/config.hpp"
#include "laft/corpus.hpp"
#include "laft/model.hpp"

#include <functional>
#include <stdexcept>

namespace laft {

/// Label-smoothed cross-entropy, mean over positions where `mask` is set:
///   -[(1 - eps) lp[target] + eps / (V - 1) * sum_{v != target} lp[v]]
/// log_probs: [B, N, V]; targets and mask: B*N. Throws if no position is set.
Tensor smoothed_ce_loss(Tape& tape, const Tensor& log_probs, std::span<const TokenId> targets,
                        std::span<const std::uint8_t> mask, double eps);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct Moments {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
};

/// One bias-corrected Adam update at step t >= 1. Empty moments are
/// zero-initialized. Throws ShapeError if the sizes of param and grad differ.
void adam_step(VectorMap param, const ConstVectorMap& grad, Moments& moments, const AdamConfig& config, long t);

class Adam {
 public:
  Adam(ParamList params, AdamConfig config);

  /// Applies one update from the gradients currently held by the params.
  void step();
  long steps() const { return step_; }
  const ParamList& params() const { return params_; }
  std::vector<Moments>& moments() { return moments_; }
  const std::vector<Moments>& moments() const { return moments_; }
  void restore(long step, std::vector<Moments> moments);
  void set_lr(double lr) { config_.lr = lr; }

 private:
  ParamList params_;
  AdamConfig config_;
  std::vector<Moments> moments_;
  long step_ = 0;
};

/// Scales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before scaling.
double clip_grad_norm(const ParamList& params, double max_norm);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;  // mean smoothed loss over the epoch's steps
  double eval_loss = 0.0;   // plain cross-entropy on the validation split
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  int best_epoch = 0;  // 0 when no epoch ran
  long steps = 0;
};

/// Caption-level batches: every caption of a clip is one example, captions of
/// the same clip are kept adjacent so they share one encoder pass.
struct Batch {
  std::vector<const Clip*> clips;
  std::vector<Index> clip_of;  // per caption, index into clips
  std::vector<std::vector<TokenId>> captions;
};

std::vector<Batch> make_batches(std::span<const Clip* const> clips, const Vocab& vocab, Index batch_size,
                                std::mt19937_64* shuffle_rng);

/// Stacked clip features for a batch: [C, T, F] (constant T required) or, for
/// imported features, [C, L_max, D] with a frame mask.
struct BatchFeatures {
  Tensor x;
  std::vector<std::uint8_t> frame_valid;  // empty when every clip has the same length
};
BatchFeatures stack_features(std::span<const Clip* const> clips, FeatureKind kind);

/// Teacher-forced forward of one batch: returns log-probs [B, N-1, V] and
/// fills the shifted targets / mask.
Tensor batch_log_probs(Tape& tape, CaptionModel& model, const Batch& batch, NormMode mode,
                       std::vector<TokenId>& targets, std::vector<std::uint8_t>& mask,
                       const AugmentConfig* augment = nullptr, std::mt19937_64* rng = nullptr);

/// Mean plain cross-entropy per target token over a split (eval-mode encoder).
double evaluate_loss(CaptionModel& model, const Corpus& corpus, Split split, Index batch_size = 16);

/// Fraction of target tokens (including <eos>) whose argmax prediction under
/// teacher forcing is correct.
double teacher_forced_accuracy(CaptionModel& model, const Corpus& corpus, Split split, Index batch_size = 16);

/// Trains on the train split, validating on the val split after each epoch.
/// `optimizer` may carry state from a checkpoint; otherwise a fresh one is
/// made. Deterministic for a given seed.
TrainResult train(CaptionModel& model, const Corpus& corpus, const TrainConfig& config, std::uint64_t seed,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {}, Adam* optimizer = nullptr);

/// Vocabulary for fine-tuning: `base` followed by the new train-split tokens
/// of `corpus` in first-seen order.
Vocab extended_vocab(const Vocab& base, const Corpus& corpus);

/// Prepares a pretrained model for `corpus`: checks that `config` agrees with
/// the model's dimensions (ConfigError otherwise) and extends the vocabulary.
void prepare_finetune(CaptionModel& model, const Corpus& corpus, const ModelConfig& config);

}  // namespace laft
