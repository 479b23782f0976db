#include "laft/decoding.hpp"

#include "laft/ops.hpp"

#include <algorithm>
#include <limits>

namespace laft {
namespace {

bool banned(Index token) { return token == kPad || token == kSos; }

void check_rows(const RowMatrix& rows, std::size_t expected) {
  if (static_cast<std::size_t>(rows.rows()) != expected) throw ShapeError("step function returned the wrong row count");
  if (rows.cols() <= kEos) throw ShapeError("step function vocabulary is too small");
}

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score() != b.score()) return a.score() > b.score();
  return a.tokens < b.tokens;
}

}  // namespace

Hypothesis greedy_decode(const StepFn& step, Index max_len) {
  Hypothesis h{{kSos}, 0.0, false};
  for (Index i = 0; i < max_len; ++i) {
    const std::vector<TokenId>* prefix = &h.tokens;
    const RowMatrix rows = step(std::span<const std::vector<TokenId>>(prefix, 1));
    check_rows(rows, 1);
    Index best = -1;
    for (Index v = 0; v < rows.cols(); ++v)
      if (!banned(v) && (best < 0 || rows(0, v) > rows(0, best))) best = v;
    h.tokens.push_back(best);
    h.log_prob += rows(0, best);
    if (best == kEos) {
      h.finished = true;
      break;
    }
  }
  return h;
}

BeamResult beam_decode(const StepFn& step, Index k, Index max_len) {
  if (k < 1) throw std::invalid_argument("beam width must be at least 1");
  std::vector<Hypothesis> live{{{kSos}, 0.0, false}};
  std::vector<Hypothesis> finished;
  struct Candidate {
    double log_prob;
    std::size_t hyp;
    Index token;
  };
  for (Index i = 0; i < max_len && !live.empty(); ++i) {
    std::vector<std::vector<TokenId>> prefixes;
    for (const auto& h : live) prefixes.push_back(h.tokens);
    const RowMatrix rows = step(prefixes);
    check_rows(rows, live.size());
    std::vector<Candidate> cands;
    for (std::size_t h = 0; h < live.size(); ++h)
      for (Index v = 0; v < rows.cols(); ++v)
        if (!banned(v)) cands.push_back({live[h].log_prob + rows(static_cast<Index>(h), v), h, v});
    const auto keep = std::min<std::size_t>(static_cast<std::size_t>(k), cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.hyp != b.hyp) return a.hyp < b.hyp;
                        return a.token < b.token;
                      });
    std::vector<Hypothesis> next;
    for (std::size_t c = 0; c < keep; ++c) {
      Hypothesis h = live[cands[c].hyp];
      h.tokens.push_back(cands[c].token);
      h.log_prob = cands[c].log_prob;
      if (cands[c].token == kEos) {
        h.finished = true;
        finished.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
  }
  BeamResult r;
  r.kbest = finished.empty() ? live : finished;
  std::sort(r.kbest.begin(), r.kbest.end(), better);
  if (static_cast<Index>(r.kbest.size()) > k) r.kbest.resize(static_cast<std::size_t>(k));
  if (r.kbest.empty()) r.kbest.push_back({{kSos}, 0.0, false});
  r.best = r.kbest.front();
  return r;
}

StepFn model_step_fn(const CaptionModel& model, const Tensor& h) {
  if (h.rank() != 3 || h.dim(0) != 1) throw ShapeError("model_step_fn: expected h of shape [1, L, D]");
  return [&model, h](std::span<const std::vector<TokenId>> prefixes) {
    Tape tape(Tape::Mode::inference);
    const TokenBatch batch = pad_batch(prefixes);
    const std::vector<Index> zeros(prefixes.size(), 0);
    const Tensor lp = model.forward(tape, batch, index_select(tape, h, zeros));
    const Index v = lp.dim(-1);
    RowMatrix out(static_cast<Index>(prefixes.size()), v);
    for (std::size_t p = 0; p < prefixes.size(); ++p) {
      const Index row = static_cast<Index>(p) * batch.length + static_cast<Index>(prefixes[p].size()) - 1;
      out.row(static_cast<Index>(p)) = ConstVectorMap(lp.data() + row * v, v).transpose();
    }
    return out;
  };
}

Tensor clip_features(CaptionModel& model, const RowMatrix& features) {
  Tape tape(Tape::Mode::inference);
  Tensor x({1, features.rows(), features.cols()});
  std::copy_n(features.data(), features.size(), x.data());
  return model.audio_features(tape, x, NormMode::eval);
}

}  // namespace laft
