#include "plasticnet/features.hpp"

namespace plasticnet {

FilteredFeatures precompute_features(const SpikeData& spikes, const Stimulus* stim,
                                     const BasisSet& basis, const TimeGrid& grid) {
  if (spikes.counts.rows() != grid.n_fine)
    throw param_error("precompute_features: spikes binned on a different grid");

  const int N = spikes.n_neurons;
  const int B = basis.n_impulse_basis;
  const int L = basis.n_lags();

  FilteredFeatures feats;
  feats.n_neurons = N;
  feats.n_basis = B;
  feats.impulse = Mat::Zero(grid.n_fine, N * B);

  for (int pre = 0; pre < N; ++pre) {
    for (double s : spikes.events[pre]) {
      int tau = grid.bin_of_time(s);
      int span = std::min(L, grid.n_fine - tau - 1);
      if (span <= 0) continue;
      feats.impulse.block(tau + 1, pre * B, span, B) += basis.impulse.topRows(span);
    }
  }

  if (stim != nullptr && !stim->empty()) {
    if (stim->values.rows() != grid.n_fine)
      throw param_error("precompute_features: stimulus length differs from grid");
    if (!stim->values.allFinite())
      throw param_error("precompute_features: stimulus values must be finite");
    const int D = stim->channels();
    const int S = basis.n_stim_basis;
    feats.n_stim_channels = D;
    feats.n_stim_basis = S;
    feats.stim = Mat::Zero(grid.n_fine, D * S);
    for (int d = 0; d < D; ++d)
      for (int t = 0; t < grid.n_fine; ++t) {
        double x = stim->values(t, d);
        if (x == 0.0) continue;
        int span = std::min(L, grid.n_fine - t - 1);
        if (span <= 0) continue;
        feats.stim.block(t + 1, d * S, span, S) += x * basis.stim.topRows(span);
      }
  }
  return feats;
}

}  // namespace plasticnet
