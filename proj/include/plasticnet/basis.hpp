#pragma once

#include "plasticnet/common.hpp"
#include "plasticnet/grid.hpp"

namespace plasticnet {

// Impulse-response and stimulus-filter bases sampled on the fine lag grid.
// Row j holds the value at lag (j+1)*fine_dt; both are zero beyond lag_max_s.
// Impulse columns are normalized to unit Riemann integral so that a synaptic
// weight reads as the expected extra drive integrated over the whole kernel;
// stimulus columns are the same raised-cosine bumps left unnormalized.
struct BasisSet {
  int n_impulse_basis = 0;
  int n_stim_basis = 0;
  double lag_max_s = 0.0;
  double fine_dt_s = 0.0;
  Mat impulse;  // n_lags x n_impulse_basis
  Mat stim;     // n_lags x n_stim_basis

  int n_lags() const { return static_cast<int>(impulse.rows()); }
};

// Raised-cosine bumps with log-spaced centers covering (0, lag_max_s],
// rectified at zero and renormalized per column.
BasisSet build_cosine_basis(int n_basis, double lag_max_s, const TimeGrid& grid);

}  // namespace plasticnet
