#pragma once

#include "laft/config.hpp"
#include "laft/corpus.hpp"
#include "laft/gradcheck.hpp"
#include "laft/metrics.hpp"
#include "laft/model.hpp"
#include "laft/training.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace laft {

struct CaptionRecord {
  std::string clip_id;
  std::string caption;
  double log_prob = 0.0;
  bool finished = false;
  std::vector<TokenId> tokens;  // with <sos>
};

/// Captions every clip. `beam` <= 0 selects greedy decoding; clips are
/// decoded on up to worker_count() threads.
std::vector<CaptionRecord> caption_clips(CaptionModel& model, std::span<const Clip* const> clips, Index beam,
                                         Index max_len);

/// Candidate/reference pairs in clip order (records must follow `clips`).
std::vector<EvalPair> eval_pairs(std::span<const CaptionRecord> records, std::span<const Clip* const> clips);

/// Central-difference check of every parameter class of a small encoder +
/// decoder model under the training loss.
GradCheckReport model_gradcheck(std::uint64_t seed, Index max_probes = 16);

/// Pretrain on A, fine-tune on B, score B's eval split.
struct TransferSettings {
  RunConfig config;
  int pretrain_epochs = 5;
  int finetune_epochs = 10;
  bool pretrain_embeddings = true;  // word2vec on the train captions of A and B
};

struct TransferRun {
  std::string variant;  // "local" or "global"
  std::uint64_t seed = 0;
  TrainResult pretrain;
  TrainResult finetune;
  MetricReport metrics;  // B eval split, beam search
};

/// One run. `local` keeps the configured window, otherwise it is disabled.
TransferRun run_transfer(const Corpus& a, const Corpus& b, const TransferSettings& settings, bool local,
                         std::uint64_t seed, const std::function<void(const std::string&)>& log = {});

/// Training on B alone with the vocabulary a transferred model would use;
/// returns its history.
TrainResult run_scratch(const Corpus& a, const Corpus& b, const TransferSettings& settings, int epochs,
                        std::uint64_t seed, const std::function<void(const std::string&)>& log = {});

double median(std::vector<double> values);

}  // namespace laft
