#pragma once

#include "laft/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace laft {

struct GradProbe {
  std::string name;
  Tensor tensor;
  /// Flat indices to probe; empty means every element (subject to max_probes).
  std::vector<Index> indices;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Per-tensor cap on probed entries, sampled with `seed`; <= 0 probes all.
  Index max_probes = 0;
  std::uint64_t seed = 0;
  /// Below this gradient norm the comparison falls back to absolute error.
  double norm_floor = 1e-8;
};

struct GradCheckEntry {
  std::string name;
  Index probes = 0;
  double rel_error = 0.0;  // |analytic - numeric| / max(|analytic|, |numeric|) over probes
  double max_abs_error = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool passed() const;
};

/// Compares tape gradients with central finite differences. `loss_fn` must
/// build a fresh graph on the tape it receives and return a scalar loss; it is
/// called once for the analytic pass and twice per probed entry.
GradCheckReport gradcheck(const std::function<Tensor(Tape&)>& loss_fn, std::vector<GradProbe> probes,
                          const GradCheckOptions& options = {});

}  // namespace laft
