#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace graphdpo {

struct ScalingRow {
  std::size_t k = 0;
  double naive_ns = 0.0;    ///< per evaluation
  double layered_ns = 0.0;  ///< per evaluation
  double ratio() const { return naive_ns / layered_ns; }
};

/// Times graph_loss_naive against graph_loss_layered on random labelings with
/// about K/2 classes. Each entry is the best of `trials` timed batches.
std::vector<ScalingRow> benchmark_loss_scaling(std::span<const std::size_t> ks,
                                               std::uint64_t seed = 7, int trials = 7);

/// Powers of two from 8 up to and including k_max.
std::vector<std::size_t> doubling_sizes(std::size_t k_max);

std::string scaling_table(std::span<const ScalingRow> rows);

}  // namespace graphdpo
