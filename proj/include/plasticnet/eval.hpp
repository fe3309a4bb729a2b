#pragma once

#include "plasticnet/basis.hpp"
#include "plasticnet/common.hpp"
#include "plasticnet/samplers.hpp"
#include "plasticnet/spikes.hpp"

namespace plasticnet {

struct PredictiveLL {
  double mean = 0.0;  // across retained posterior samples
  double sd = 0.0;    // Monte Carlo std (sample std, not SE)
  int n = 0;          // retained samples
};

// Held-out predictive log likelihood: every retained record's weight state at
// the train boundary is propagated noiselessly (transition_mean) across the
// held-out windows, with the STDP sums computed from the observed spikes,
// then the point-process likelihood of the held-out spikes is evaluated.
// spikes/grid cover the full duration; train_end_s must sit on a coarse
// boundary strictly inside it.
PredictiveLL predictive_ll(const PosteriorChain& chain, double train_end_s,
                           const SpikeData& spikes, const TimeGrid& grid, const BasisSet& basis,
                           double burn_in_frac = 0.5);

struct RocResult {
  double auc = 0.0;
  Vec threshold;  // descending; first entry +inf for the (0,0) point
  Vec fpr;        // nondecreasing, ends at 1
  Vec tpr;        // nondecreasing, ends at 1
};

// ROC over the off-diagonal entries by sweeping a threshold over the scores
// (ties grouped); the AUC comes from the rank statistic, which matches the
// trapezoid under the returned points.
RocResult edge_roc(const Mat& scores, const IMat& truth_adjacency);

// Per-row RMSE after the closed-form affine fit a*estimated + b ~= truth.
// A constant estimate gets a = 0, b = mean(truth).
Vec trajectory_error(const Mat& estimated, const Mat& truth);

// Records kept after discarding the first burn_in_frac of the chain.
std::pair<size_t, size_t> burn_in_range(size_t n_records, double burn_in_frac);

// Posterior means over retained records: edge probability matrix (diagonal =
// self-edge frequency) and per-pair weight trajectories (zero while absent).
Mat posterior_edge_probability(const PosteriorChain& chain, double burn_in_frac = 0.5);
Mat posterior_mean_weights(const PosteriorChain& chain, double burn_in_frac = 0.5);

}  // namespace plasticnet
