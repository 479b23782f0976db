#include "laft/experiments.hpp"

#include "laft/decoding.hpp"
#include "laft/ops.hpp"
#include "laft/parallel.hpp"
#include "laft/word2vec.hpp"

#include <algorithm>
#include <stdexcept>

namespace laft {

std::vector<CaptionRecord> caption_clips(CaptionModel& model, std::span<const Clip* const> clips, Index beam,
                                         Index max_len) {
  std::vector<Tensor> features;
  features.reserve(clips.size());
  for (const Clip* c : clips) features.push_back(clip_features(model, c->features));
  std::vector<CaptionRecord> out(clips.size());
  const CaptionModel& frozen = model;
  parallel_for(clips.size(), [&](std::size_t i) {
    const StepFn step = model_step_fn(frozen, features[i]);
    const Hypothesis h = beam <= 0 ? greedy_decode(step, max_len) : beam_decode(step, beam, max_len).best;
    out[i] = {clips[i]->id, frozen.vocab().decode(h.tokens), h.log_prob, h.finished, h.tokens};
  });
  return out;
}

std::vector<EvalPair> eval_pairs(std::span<const CaptionRecord> records, std::span<const Clip* const> clips) {
  if (records.size() != clips.size()) throw std::invalid_argument("eval_pairs: record and clip counts differ");
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (records[i].clip_id != clips[i]->id)
      throw std::invalid_argument("eval_pairs: caption for '" + records[i].clip_id + "' where '" + clips[i]->id +
                                  "' was expected");
    EvalPair p;
    if (!records[i].caption.empty()) p.candidate = tokenize(records[i].caption);
    for (const auto& ref : clips[i]->captions) p.references.push_back(tokenize(ref));
    pairs.push_back(std::move(p));
  }
  return pairs;
}

GradCheckReport model_gradcheck(std::uint64_t seed, Index max_probes) {
  ModelConfig mc;
  mc.encoder.channels = {2, 4, 8, 16};
  mc.encoder.out_dim = 6;
  mc.encoder.hidden_dim = 8;
  mc.encoder.n_mels = 8;
  mc.decoder.dim = 6;
  mc.decoder.blocks = 1;
  mc.decoder.max_tokens = 8;
  mc.decoder.max_frames = 6;
  mc.decoder.window = 2;
  const Vocab vocab = Vocab::build(std::vector<std::string>{"a dog barks then a horn honks"});
  CaptionModel model(mc, vocab, seed);

  std::mt19937_64 rng(seed ^ 0x5eedull);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (const auto& p : model.parameters()) {
    // moves every parameter off its initial value (zero biases, unit gains)
    Tensor t = p.tensor;
    for (Index i = 0; i < t.size(); ++i)
      if (p.name != "dec.embedding" || i >= mc.decoder.dim) t[i] += 0.3 * uni(rng);
  }
  Tensor x({2, 80, 8});
  for (double& v : x.values()) v = uni(rng);
  const std::vector<std::vector<TokenId>> inputs{vocab.encode("a dog barks then a horn"), vocab.encode("a horn honks")};
  const TokenBatch batch = pad_batch(inputs);
  std::vector<TokenId> targets;
  for (Index b = 0; b < batch.batch; ++b)
    for (Index n = 0; n < batch.length; ++n) {
      const auto& seq = inputs[static_cast<std::size_t>(b)];
      const auto next = static_cast<std::size_t>(n + 1);
      targets.push_back(next < seq.size() ? seq[next] : kEos);
    }

  auto loss_fn = [&](Tape& tape) {
    const Tensor h = model.audio_features(tape, x, NormMode::train);
    return smoothed_ce_loss(tape, model.forward(tape, batch, h), targets, batch.valid, 0.1);
  };
  const Index tokens = batch.length, frames = encoded_length(x.dim(1));
  std::vector<GradProbe> probes;
  for (const auto& p : model.parameters()) {
    GradProbe g{p.name, p.tensor, {}};
    if (p.name == "dec.embedding") {
      for (Index i = mc.decoder.dim; i < p.tensor.size(); ++i) g.indices.push_back(i);
    } else if (p.name.ends_with("fim.M")) {
      for (Index r = 0; r < tokens; ++r)
        for (Index c = 0; c <= r; ++c) g.indices.push_back(r * mc.decoder.max_tokens + c);
    } else if (p.name.ends_with("lac.Z")) {
      for (Index r = 0; r < tokens; ++r)
        for (Index c = 0; c < frames; ++c) g.indices.push_back(r * mc.decoder.max_frames + c);
    }
    probes.push_back(std::move(g));
  }
  GradCheckOptions opt;
  opt.max_probes = max_probes;
  opt.seed = seed;
  return gradcheck(loss_fn, std::move(probes), opt);
}

namespace {

void note(const std::function<void(const std::string&)>& log, const std::string& msg) {
  if (log) log(msg);
}

std::function<void(const EpochMetrics&)> epoch_logger(const std::function<void(const std::string&)>& log,
                                                      const std::string& tag) {
  if (!log) return {};
  return [log, tag](const EpochMetrics& e) {
    log(tag + " epoch " + std::to_string(e.epoch) + " train_loss " + std::to_string(e.train_loss) + " eval_loss " +
        std::to_string(e.eval_loss));
  };
}

}  // namespace

TransferRun run_transfer(const Corpus& a, const Corpus& b, const TransferSettings& settings, bool local,
                         std::uint64_t seed, const std::function<void(const std::string&)>& log) {
  TransferRun run;
  run.variant = local ? "local" : "global";
  run.seed = seed;
  ModelConfig mc = settings.config.model;
  mc.decoder.window_enabled = local;
  const Vocab base = Vocab::build(a.captions(Split::train));
  CaptionModel model(mc, base, seed);

  if (settings.pretrain_embeddings) {
    const Vocab joint = extended_vocab(base, b);
    std::vector<std::vector<TokenId>> sentences;
    for (const Corpus* c : {&a, &b})
      for (const auto& cap : c->captions(Split::train)) sentences.push_back(joint.encode(cap));
    Word2VecConfig w2v = settings.config.word2vec;
    w2v.dim = mc.decoder.dim;
    w2v.seed = seed;
    model.load_embeddings(joint, train_word2vec(sentences, joint.size(), w2v).input_vectors);
  }

  const std::string tag = run.variant + " seed " + std::to_string(seed);
  TrainConfig pre = settings.config.train;
  pre.epochs = settings.pretrain_epochs;
  note(log, tag + ": pretraining on " + a.name);
  run.pretrain = train(model, a, pre, seed, epoch_logger(log, tag + " pretrain"));

  prepare_finetune(model, b, mc);
  TrainConfig fine = settings.config.train;
  fine.epochs = settings.finetune_epochs;
  note(log, tag + ": fine-tuning on " + b.name);
  run.finetune = train(model, b, fine, seed + 1, epoch_logger(log, tag + " finetune"));

  const auto clips = b.select(Split::eval);
  const auto records = caption_clips(model, clips, settings.config.decode.beam, settings.config.decode.max_len);
  run.metrics = evaluate_all(eval_pairs(records, clips));
  note(log, tag + ": cider_d " + std::to_string(run.metrics.cider_d));
  return run;
}

TrainResult run_scratch(const Corpus& a, const Corpus& b, const TransferSettings& settings, int epochs,
                        std::uint64_t seed, const std::function<void(const std::string&)>& log) {
  const Vocab vocab = extended_vocab(Vocab::build(a.captions(Split::train)), b);
  CaptionModel model(settings.config.model, vocab, seed);
  TrainConfig tc = settings.config.train;
  tc.epochs = epochs;
  return train(model, b, tc, seed + 1, epoch_logger(log, "scratch seed " + std::to_string(seed)));
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace laft
