#pragma once

#include <vector>

#include "plasticnet/basis.hpp"
#include "plasticnet/common.hpp"
#include "plasticnet/features.hpp"
#include "plasticnet/grid.hpp"
#include "plasticnet/spikes.hpp"

namespace plasticnet {

struct MapFitOptions {
  int max_iters = 2000;
  // gradient-mapping norm ||y - prox(y)|| / step in the solver's scaled
  // coordinates; bounds the KKT residual, unlike an objective plateau
  double tol = 1e-5;
  double step0 = 1.0;  // initial proximal step, adapted by backtracking
  int k_begin = 0;
  int k_end = -1;  // -1: full grid
};

struct MapFit {
  Vec bias;         // per neuron
  Mat coeffs;       // (N*B) x N, unnormalized kernel coefficients, row pre*B+b
  Mat edge_scores;  // N x N, |summed coefficient| per ordered pair, diagonal 0
  double lambda = 0.0;
  double objective = 0.0;  // penalized negative log likelihood at the solution
  bool converged = false;
  int n_iters = 0;
};

// Static-network MAP surrogate: exponential-link GLM over the same filtered
// features, with a group penalty lambda * sum_pairs ||coeff group||_2 that
// shrinks whole per-pair kernel groups to exactly zero. Solved per
// postsynaptic neuron by proximal gradient with backtracking. Kernel columns
// integrate to one, so |sum of a group| is the impulse area used as the
// edge score.
MapFit fit_map_glasso(const SpikeData& spikes, const BasisSet& basis, double lambda,
                      const TimeGrid& grid, const MapFitOptions& opt = {});

// Variant reusing precomputed features (the convolutions dominate the cost).
MapFit fit_map_glasso(const SpikeData& spikes, const FilteredFeatures& feats, double lambda,
                      const TimeGrid& grid, const MapFitOptions& opt = {});

// Smooth part of one neuron's objective (negative log likelihood as a
// function of x = [bias; coefficient column]); exposed for gradient checks.
double map_glasso_smooth(const Vec& x, int post, const SpikeData& spikes,
                         const FilteredFeatures& feats, const TimeGrid& grid, int k_begin,
                         int k_end, Vec* grad);

// Group soft-threshold: v scaled by max(0, 1 - threshold/||v||).
Vec group_shrink(const Vec& v, double threshold);

// Pick lambda from a candidate grid by held-out likelihood: fit on the first
// (1 - holdout_frac) of the coarse windows, score the smooth likelihood on
// the rest, return the best candidate.
double select_map_lambda(const SpikeData& spikes, const FilteredFeatures& feats,
                         const TimeGrid& grid, const std::vector<double>& candidates,
                         double holdout_frac = 0.2, const MapFitOptions& opt = {});

// Cross-correlogram edge scores: for each ordered pair, bin the positive lags
// post - pre over (0, 3*max_lag], take the mean over (max_lag, 3*max_lag] as
// the baseline, and score the maximum absolute deviation from that baseline
// over (0, max_lag]. Diagonal scores are zero.
Mat xcorr_scores(const SpikeData& spikes, double max_lag_s = 0.1, double bin_s = 2e-3);

}  // namespace plasticnet
