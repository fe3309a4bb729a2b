#pragma once

#include <vector>

#include "plasticnet/common.hpp"
#include "plasticnet/grid.hpp"

namespace plasticnet {

// Spike trains in two synchronized views: exact event times (used by the
// plasticity rules) and fine-grid counts (used by the likelihood).
struct SpikeData {
  int n_neurons = 0;
  std::vector<std::vector<double>> events;  // per neuron, sorted, in [0, T)
  IMat counts;                              // n_fine x n_neurons

  static SpikeData from_events(std::vector<std::vector<double>> events, const TimeGrid& grid);

  long long total_count(int neuron) const;
  long long total_count() const;
};

// Optional external covariates sampled on the fine grid.
struct Stimulus {
  Mat values;  // n_fine x n_channels
  int channels() const { return static_cast<int>(values.cols()); }
  bool empty() const { return values.size() == 0; }
};

}  // namespace plasticnet
