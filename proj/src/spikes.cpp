#include "plasticnet/spikes.hpp"

#include <algorithm>

namespace plasticnet {

SpikeData SpikeData::from_events(std::vector<std::vector<double>> events, const TimeGrid& grid) {
  SpikeData data;
  data.n_neurons = static_cast<int>(events.size());
  data.counts = IMat::Zero(grid.n_fine, data.n_neurons);
  for (int n = 0; n < data.n_neurons; ++n) {
    const auto& ev = events[n];
    if (!std::is_sorted(ev.begin(), ev.end()))
      throw param_error("SpikeData: event times must be sorted ascending");
    for (double t : ev) {
      if (t < 0.0 || t >= grid.duration_s)
        throw param_error("SpikeData: event time outside [0, T)");
      data.counts(grid.bin_of_time(t), n) += 1;
    }
  }
  data.events = std::move(events);
  return data;
}

long long SpikeData::total_count(int neuron) const {
  return static_cast<long long>(events.at(neuron).size());
}

long long SpikeData::total_count() const {
  long long total = 0;
  for (int n = 0; n < n_neurons; ++n) total += total_count(n);
  return total;
}

}  // namespace plasticnet
