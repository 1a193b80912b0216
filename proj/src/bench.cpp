#include "graphdpo/bench.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include <fmt/format.h>

#include "graphdpo/objective.hpp"
#include "graphdpo/pref_graph.hpp"

namespace graphdpo {
namespace {

template <class Fn>
double best_ns_per_call(Fn&& fn, int trials) {
  using clock = std::chrono::steady_clock;
  // Calibrate the batch so one trial runs for roughly 2 ms.
  std::size_t reps = 1;
  for (;;) {
    const auto t0 = clock::now();
    for (std::size_t r = 0; r < reps; ++r) fn();
    const auto ns = std::chrono::duration<double, std::nano>(clock::now() - t0).count();
    if (ns > 2e6 || reps > (1u << 24)) break;
    reps *= 2;
  }
  double best = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto t0 = clock::now();
    for (std::size_t r = 0; r < reps; ++r) fn();
    const double ns = std::chrono::duration<double, std::nano>(clock::now() - t0).count() /
                      static_cast<double>(reps);
    best = t == 0 ? ns : std::min(best, ns);
  }
  return best;
}

}  // namespace

std::vector<ScalingRow> benchmark_loss_scaling(std::span<const std::size_t> ks,
                                               std::uint64_t seed, int trials) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ScalingRow> rows;
  for (std::size_t k : ks) {
    std::uniform_int_distribution<int> level(0, static_cast<int>(std::max<std::size_t>(1, k / 2)));
    PreferenceLabeling labeling;
    std::vector<double> raw;
    for (std::size_t i = 0; i < k; ++i) {
      labeling.labels.push_back(level(rng));
      raw.push_back(normal(rng));
    }
    const PreferenceGraph graph = build_from_labels(labeling);
    const ScoreSet scores = center(raw);
    volatile double sink = 0.0;
    ScalingRow row;
    row.k = k;
    row.naive_ns = best_ns_per_call([&] { sink = graph_loss_naive(scores, graph).loss; }, trials);
    row.layered_ns =
        best_ns_per_call([&] { sink = graph_loss_layered(scores, graph).loss; }, trials);
    (void)sink;
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::size_t> doubling_sizes(std::size_t k_max) {
  std::vector<std::size_t> out;
  for (std::size_t k = 8; k <= k_max; k *= 2) out.push_back(k);
  return out;
}

std::string scaling_table(std::span<const ScalingRow> rows) {
  std::string out = fmt::format("{:>6} {:>14} {:>14} {:>10}\n", "K", "naive_ns", "layered_ns",
                                "ratio");
  for (const ScalingRow& r : rows)
    out += fmt::format("{:>6} {:>14.1f} {:>14.1f} {:>10.2f}\n", r.k, r.naive_ns, r.layered_ns,
                       r.ratio());
  return out;
}

}  // namespace graphdpo
