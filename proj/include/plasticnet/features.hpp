#pragma once

#include "plasticnet/basis.hpp"
#include "plasticnet/common.hpp"
#include "plasticnet/spikes.hpp"

namespace plasticnet {

// Precomputed causal convolutions. Impulse features depend only on the
// presynaptic train, so the (n'-> n) feature for basis b lives in column
// n'*B + b and is shared across all postsynaptic neurons. The value at fine
// bin t sums basis samples at the snapped lag (t - bin(s))*dt over spikes s
// strictly before bin t, so bin t never sees its own spikes.
struct FilteredFeatures {
  int n_neurons = 0;
  int n_basis = 0;
  int n_stim_channels = 0;
  int n_stim_basis = 0;
  Mat impulse;  // n_fine x (N*B), column = pre*B + b
  Mat stim;     // n_fine x (D*S), column = d*S + s; empty without stimulus

  auto impulse_col(int pre, int b) const { return impulse.col(pre * n_basis + b); }
};

FilteredFeatures precompute_features(const SpikeData& spikes, const Stimulus* stim,
                                     const BasisSet& basis, const TimeGrid& grid);

}  // namespace plasticnet
