#include "laft/training.hpp"

#include "laft/frontend.hpp"
#include "laft/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace laft {

Tensor smoothed_ce_loss(Tape& tape, const Tensor& log_probs, std::span<const TokenId> targets,
                        std::span<const std::uint8_t> mask, double eps) {
  if (log_probs.rank() < 2) throw ShapeError("smoothed_ce_loss: log_probs must be [..., V]");
  const Index v = log_probs.dim(-1), rows = log_probs.size() / v;
  if (static_cast<Index>(targets.size()) != rows || static_cast<Index>(mask.size()) != rows)
    throw ShapeError("smoothed_ce_loss: expected " + std::to_string(rows) + " targets and mask entries");
  if (v < 2) throw ShapeError("smoothed_ce_loss: vocabulary must have at least two entries");
  if (!(eps >= 0.0 && eps < 1.0)) throw std::invalid_argument("label smoothing must be in [0, 1)");
  const Index count = std::count_if(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; });
  if (count == 0) throw std::invalid_argument("smoothed_ce_loss: every target position is padding");

  const double on = 1.0 - eps, off = eps / static_cast<double>(v - 1);
  const auto lp = log_probs.matrix();
  double total = 0.0;
  for (Index r = 0; r < rows; ++r) {
    if (!mask[static_cast<std::size_t>(r)]) continue;
    const TokenId t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= v) throw ShapeError("target id " + std::to_string(t) + " out of range for vocab " + std::to_string(v));
    const double row_sum = lp.row(r).sum();
    total -= on * lp(r, t) + off * (row_sum - lp(r, t));
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(count));
  std::vector<TokenId> tg(targets.begin(), targets.end());
  std::vector<std::uint8_t> mk(mask.begin(), mask.end());
  tape.record("smoothed_ce_loss", {log_probs}, out,
              [log_probs, out, tg = std::move(tg), mk = std::move(mk), rows, on, off, count]() mutable {
                const double g = out.grad()[0] / static_cast<double>(count);
                auto gl = log_probs.grad_matrix();
                for (Index r = 0; r < rows; ++r) {
                  if (!mk[static_cast<std::size_t>(r)]) continue;
                  gl.row(r).array() -= g * off;
                  gl(r, tg[static_cast<std::size_t>(r)]) -= g * (on - off);
                }
              });
  return out;
}

void adam_step(VectorMap param, const ConstVectorMap& grad, Moments& moments, const AdamConfig& c, long t) {
  if (param.size() != grad.size())
    throw ShapeError("adam_step: parameter has " + std::to_string(param.size()) + " entries but gradient has " +
                     std::to_string(grad.size()));
  if (t < 1) throw std::invalid_argument("adam_step: step count must be at least 1");
  if (moments.m.size() == 0) {
    moments.m = Eigen::VectorXd::Zero(param.size());
    moments.v = Eigen::VectorXd::Zero(param.size());
  }
  if (moments.m.size() != param.size() || moments.v.size() != param.size())
    throw ShapeError("adam_step: moment size does not match parameter");
  moments.m = c.beta1 * moments.m + (1.0 - c.beta1) * grad;
  moments.v = c.beta2 * moments.v + (1.0 - c.beta2) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  param.array() -= c.lr * (moments.m.array() / bc1) / ((moments.v.array() / bc2).sqrt() + c.eps);
}

Adam::Adam(ParamList params, AdamConfig config)
    : params_(std::move(params)), config_(config), moments_(params_.size()) {}

void Adam::step() {
  ++step_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].tensor;
    if (!p.requires_grad() || !p.has_grad()) continue;
    adam_step(p.vector(), std::as_const(p).grad_vector(), moments_[i], config_, step_);
  }
}

void Adam::restore(long step, std::vector<Moments> moments) {
  if (moments.size() != params_.size()) throw std::invalid_argument("optimizer state does not match parameters");
  step_ = step;
  moments_ = std::move(moments);
}

double clip_grad_norm(const ParamList& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    if (p.tensor.has_grad()) sq += p.tensor.grad_vector().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (const auto& p : params)
      if (p.tensor.has_grad()) p.tensor.ensure_grad() *= f;
  }
  return norm;
}

std::vector<Batch> make_batches(std::span<const Clip* const> clips, const Vocab& vocab, Index batch_size,
                                std::mt19937_64* shuffle_rng) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  std::vector<const Clip*> order(clips.begin(), clips.end());
  if (shuffle_rng) {
    std::shuffle(order.begin(), order.end(), *shuffle_rng);
    // Bucket neighbouring clips by caption length to limit padding.
    auto mean_len = [](const Clip* c) {
      std::size_t n = 0;
      for (const auto& s : c->captions) n += s.size();
      return static_cast<double>(n) / static_cast<double>(c->captions.size());
    };
    const std::size_t window = static_cast<std::size_t>(batch_size) * 2;
    for (std::size_t i = 0; i < order.size(); i += window) {
      const auto end = order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + window));
      std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(i), end,
                       [&](const Clip* a, const Clip* b) { return mean_len(a) < mean_len(b); });
    }
  }
  std::vector<Batch> batches;
  Batch cur;
  for (const Clip* c : order) {
    for (const std::string& caption : c->captions) {
      if (static_cast<Index>(cur.captions.size()) == batch_size) batches.push_back(std::exchange(cur, {}));
      if (cur.clips.empty() || cur.clips.back() != c) cur.clips.push_back(c);
      cur.clip_of.push_back(static_cast<Index>(cur.clips.size()) - 1);
      cur.captions.push_back(vocab.encode(caption));
    }
  }
  if (!cur.captions.empty()) batches.push_back(std::move(cur));
  if (shuffle_rng) std::shuffle(batches.begin(), batches.end(), *shuffle_rng);
  return batches;
}

BatchFeatures stack_features(std::span<const Clip* const> clips, FeatureKind kind) {
  if (clips.empty()) throw std::invalid_argument("stack_features: no clips");
  const Index cols = clips.front()->features.cols();
  Index rows = 0;
  bool ragged = false;
  for (const Clip* c : clips) {
    if (c->features.cols() != cols) throw ShapeError("clip " + c->id + " has a different feature width");
    if (rows != 0 && c->features.rows() != rows) ragged = true;
    rows = std::max(rows, c->features.rows());
  }
  if (ragged && kind == FeatureKind::logmel)
    throw ShapeError("log-mel clips in a corpus must share one frame count");
  const auto n = static_cast<Index>(clips.size());
  BatchFeatures out{Tensor({n, rows, cols}), {}};
  if (ragged) out.frame_valid.assign(static_cast<std::size_t>(n * rows), 0);
  for (Index i = 0; i < n; ++i) {
    const RowMatrix& f = clips[static_cast<std::size_t>(i)]->features;
    std::copy_n(f.data(), f.size(), out.x.data() + i * rows * cols);
    if (ragged) std::fill_n(out.frame_valid.begin() + i * rows, f.rows(), std::uint8_t{1});
  }
  return out;
}

Tensor batch_log_probs(Tape& tape, CaptionModel& model, const Batch& batch, NormMode mode,
                       std::vector<TokenId>& targets, std::vector<std::uint8_t>& mask, const AugmentConfig* augment,
                       std::mt19937_64* rng) {
  BatchFeatures feats = stack_features(batch.clips, model.config().input);
  if (augment && augment->enabled && rng && model.config().input == FeatureKind::logmel) {
    const Index c = feats.x.dim(0), t = feats.x.dim(1), f = feats.x.dim(2);
    for (Index i = 0; i < c; ++i) {
      Eigen::Map<RowMatrix> clip(feats.x.data() + i * t * f, t, f);
      const auto stripes = sample_stripes(t, f, augment->time_masks, augment->freq_masks, augment->max_width, *rng);
      clip = apply_stripes(clip, stripes);
    }
  }
  const Tensor h_clips = model.audio_features(tape, feats.x, mode);
  const Tensor h = index_select(tape, h_clips, batch.clip_of);
  std::vector<std::uint8_t> frame_valid;
  if (!feats.frame_valid.empty()) {
    const Index l = h_clips.dim(1);
    for (Index c : batch.clip_of)
      frame_valid.insert(frame_valid.end(), feats.frame_valid.begin() + c * l, feats.frame_valid.begin() + (c + 1) * l);
  }

  std::vector<std::vector<TokenId>> inputs;
  inputs.reserve(batch.captions.size());
  for (const auto& cap : batch.captions) inputs.emplace_back(cap.begin(), cap.end() - 1);
  const TokenBatch in = pad_batch(inputs);
  targets.assign(in.ids.size(), kPad);
  mask = in.valid;
  for (Index b = 0; b < in.batch; ++b) {
    const auto& cap = batch.captions[static_cast<std::size_t>(b)];
    for (std::size_t j = 0; j + 1 < cap.size(); ++j) targets[static_cast<std::size_t>(b * in.length) + j] = cap[j + 1];
  }
  return model.forward(tape, in, h, frame_valid);
}

namespace {

template <typename Fn>
void for_each_eval_batch(CaptionModel& model, const Corpus& corpus, Split split, Index batch_size, Fn&& fn) {
  const auto clips = corpus.select(split);
  for (const Batch& batch : make_batches(clips, model.vocab(), batch_size, nullptr)) {
    Tape tape(Tape::Mode::inference);
    std::vector<TokenId> targets;
    std::vector<std::uint8_t> mask;
    const Tensor lp = batch_log_probs(tape, model, batch, NormMode::eval, targets, mask);
    fn(tape, lp, targets, mask);
  }
}

struct Snapshot {
  std::vector<Eigen::VectorXd> params;
  std::vector<RunningStats> stats;
};

Snapshot take_snapshot(CaptionModel& model) {
  Snapshot s;
  for (const auto& p : model.parameters()) s.params.push_back(p.tensor.vector());
  for (const auto& r : model.running_stats()) s.stats.push_back(*r.stats);
  return s;
}

void restore_snapshot(CaptionModel& model, const Snapshot& s) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].tensor.vector() = s.params[i];
  auto stats = model.running_stats();
  for (std::size_t i = 0; i < stats.size(); ++i) *stats[i].stats = s.stats[i];
}

}  // namespace

double evaluate_loss(CaptionModel& model, const Corpus& corpus, Split split, Index batch_size) {
  double total = 0.0;
  Index count = 0;
  for_each_eval_batch(model, corpus, split, batch_size,
                      [&](Tape& tape, const Tensor& lp, const std::vector<TokenId>& targets,
                          const std::vector<std::uint8_t>& mask) {
                        const Index n = std::count(mask.begin(), mask.end(), std::uint8_t{1});
                        total += smoothed_ce_loss(tape, lp, targets, mask, 0.0).item() * static_cast<double>(n);
                        count += n;
                      });
  if (count == 0) throw std::invalid_argument("evaluate_loss: split " + to_string(split) + " is empty");
  return total / static_cast<double>(count);
}

double teacher_forced_accuracy(CaptionModel& model, const Corpus& corpus, Split split, Index batch_size) {
  Index correct = 0, count = 0;
  for_each_eval_batch(model, corpus, split, batch_size,
                      [&](Tape&, const Tensor& lp, const std::vector<TokenId>& targets,
                          const std::vector<std::uint8_t>& mask) {
                        const auto m = lp.matrix();
                        for (Index r = 0; r < m.rows(); ++r) {
                          if (!mask[static_cast<std::size_t>(r)]) continue;
                          Index best = 0;
                          m.row(r).maxCoeff(&best);
                          correct += best == targets[static_cast<std::size_t>(r)];
                          ++count;
                        }
                      });
  if (count == 0) throw std::invalid_argument("teacher_forced_accuracy: split " + to_string(split) + " is empty");
  return static_cast<double>(correct) / static_cast<double>(count);
}

TrainResult train(CaptionModel& model, const Corpus& corpus, const TrainConfig& config, std::uint64_t seed,
                  const std::function<void(const EpochMetrics&)>& on_epoch, Adam* optimizer) {
  config.validate();
  model.set_embedding_trainable(config.finetune_embeddings);
  const auto train_clips = corpus.select(Split::train);
  if (train_clips.empty()) throw std::invalid_argument("corpus has no training clips");
  const Split val_split = corpus.select(Split::val).empty() ? Split::train : Split::val;

  ParamList trainable;
  for (const auto& p : model.parameters())
    if (p.tensor.requires_grad()) trainable.push_back(p);
  std::optional<Adam> local;
  if (!optimizer) optimizer = &local.emplace(trainable, AdamConfig{config.lr});
  optimizer->set_lr(config.lr);
  std::vector<Tensor> handles;
  for (const auto& p : trainable) handles.push_back(p.tensor);

  std::mt19937_64 rng(seed);
  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  std::optional<Snapshot> best_state;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = make_batches(train_clips, model.vocab(), config.batch_size, &rng);
    double loss_sum = 0.0;
    for (std::size_t s = 0; s < batches.size(); ++s) {
      const auto where = [&] { return "epoch " + std::to_string(epoch) + " step " + std::to_string(s + 1); };
      try {
        for (Tensor& h : handles) h.clear_grad();
        Tape tape;
        std::vector<TokenId> targets;
        std::vector<std::uint8_t> mask;
        const Tensor lp = batch_log_probs(tape, model, batches[s], NormMode::train, targets, mask, &config.augment, &rng);
        const Tensor loss = smoothed_ce_loss(tape, lp, targets, mask, config.label_smoothing);
        if (!std::isfinite(loss.item())) throw TrainingDiverged("non-finite loss at " + where());
        tape.backward(loss, handles);
        if (config.clip_grad) clip_grad_norm(trainable, config.clip_norm);
        optimizer->step();
        loss_sum += loss.item();
      } catch (const NumericError& e) {
        throw TrainingDiverged("training diverged at " + where() + ": " + e.what());
      }
      ++result.steps;
    }
    EpochMetrics m{epoch, loss_sum / static_cast<double>(batches.size()),
                   evaluate_loss(model, corpus, val_split, config.batch_size)};
    if (!std::isfinite(m.eval_loss)) throw TrainingDiverged("non-finite validation loss after epoch " + std::to_string(epoch));
    result.history.push_back(m);
    if (m.eval_loss < best) {
      best = m.eval_loss;
      result.best_epoch = epoch;
      if (config.select_best && epoch < config.epochs) best_state = take_snapshot(model);
      else best_state.reset();
    }
    if (on_epoch) on_epoch(m);
  }
  if (config.select_best && best_state) restore_snapshot(model, *best_state);
  return result;
}

Vocab extended_vocab(const Vocab& base, const Corpus& corpus) {
  Vocab out = base;
  for (const std::string& caption : corpus.captions(Split::train))
    for (const std::string& w : tokenize(caption))
      if (!out.contains(w)) out.add(w);
  return out;
}

void prepare_finetune(CaptionModel& model, const Corpus& corpus, const ModelConfig& config) {
  const ModelConfig& have = model.config();
  auto mismatch = [](const std::string& what, auto a, auto b) {
    throw ConfigError("dimension mismatch between checkpoint and config: " + what + " " + std::to_string(a) + " vs " +
                      std::to_string(b));
  };
  if (have.input != config.input) throw ConfigError("checkpoint and config disagree on the feature input kind");
  if (have.input == FeatureKind::logmel) {
    for (std::size_t i = 0; i < 4; ++i)
      if (have.encoder.channels[i] != config.encoder.channels[i])
        mismatch("encoder channels", have.encoder.channels[i], config.encoder.channels[i]);
    if (have.encoder.out_dim != config.encoder.out_dim) mismatch("encoder out_dim", have.encoder.out_dim, config.encoder.out_dim);
    if (have.encoder.hidden() != config.encoder.hidden()) mismatch("encoder hidden", have.encoder.hidden(), config.encoder.hidden());
    if (have.encoder.n_mels != config.encoder.n_mels) mismatch("n_mels", have.encoder.n_mels, config.encoder.n_mels);
    if (have.encoder.use_batchnorm != config.encoder.use_batchnorm)
      throw ConfigError("checkpoint and config disagree on use_batchnorm");
  }
  const DecoderConfig &a = have.decoder, &b = config.decoder;
  if (a.dim != b.dim) mismatch("D", a.dim, b.dim);
  if (a.blocks != b.blocks) mismatch("blocks", a.blocks, b.blocks);
  if (a.max_tokens != b.max_tokens) mismatch("max_tokens", a.max_tokens, b.max_tokens);
  if (a.max_frames != b.max_frames) mismatch("max_frames", a.max_frames, b.max_frames);
  if (a.ffn != b.ffn) throw ConfigError("checkpoint and config disagree on the feed-forward sublayer");
  model.set_window(b.window, b.window_enabled);
  model.extend_vocab(extended_vocab(model.vocab(), corpus));
}

}  // namespace laft
