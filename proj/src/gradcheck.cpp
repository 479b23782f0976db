#include "laft/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace laft {

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradCheckEntry& e) { return e.passed; });
}

GradCheckReport gradcheck(const std::function<Tensor(Tape&)>& loss_fn, std::vector<GradProbe> probes,
                          const GradCheckOptions& options) {
  for (GradProbe& p : probes) p.tensor.clear_grad();
  {
    Tape tape;
    Tensor loss = loss_fn(tape);
    std::vector<Tensor> params;
    for (const GradProbe& p : probes) params.push_back(p.tensor);
    tape.backward(loss, params);
  }
  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (GradProbe& p : probes) {
    std::vector<Index> idx = p.indices;
    if (idx.empty()) {
      idx.resize(static_cast<std::size_t>(p.tensor.size()));
      std::iota(idx.begin(), idx.end(), Index{0});
    }
    if (options.max_probes > 0 && static_cast<Index>(idx.size()) > options.max_probes) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(static_cast<std::size_t>(options.max_probes));
      std::sort(idx.begin(), idx.end());
    }
    const std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0, max_abs = 0.0;
    for (Index i : idx) {
      double& v = p.tensor[i];
      const double saved = v;
      Tape probe(Tape::Mode::inference);
      v = saved + options.step;
      const double up = loss_fn(probe).item();
      v = saved - options.step;
      const double down = loss_fn(probe).item();
      v = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[static_cast<std::size_t>(i)];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
      max_abs = std::max(max_abs, std::abs(a - numeric));
    }
    GradCheckEntry e;
    e.name = p.name;
    e.probes = static_cast<Index>(idx.size());
    const double scale = std::max(std::sqrt(a2), std::sqrt(n2));
    e.rel_error = scale < options.norm_floor ? std::sqrt(diff2) : std::sqrt(diff2) / scale;
    e.max_abs_error = max_abs;
    e.passed = e.rel_error < options.tolerance;
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace laft
