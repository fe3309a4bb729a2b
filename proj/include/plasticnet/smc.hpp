#pragma once

#include <vector>

#include "plasticnet/common.hpp"
#include "plasticnet/obs.hpp"
#include "plasticnet/plasticity.hpp"
#include "plasticnet/rng.hpp"

namespace plasticnet {

// Prior over one synapse's weight trajectory: an initial distribution plus
// per-step STDP transitions. For bounded rules the initial distribution is
// truncated to [w_min, w_max] with the normalizer included in its density.
struct WeightTransition {
  LearningRuleParams rule;
  double coarse_dt = 1.0;
  DistSpec init = DistSpec::Normal(0.5, 0.5);
  std::vector<StdpUpdate> updates;  // updates[k-1] drives the step into k

  int n_steps() const { return static_cast<int>(updates.size()) + 1; }
  bool deterministic() const { return rule.noise_std == 0.0; }
  double sample_initial(Rng& rng) const;
  double log_density_initial(double w) const;
  double sample_step(int k, double w, Rng& rng) const;
  double log_density_step(int k, double w_next, double w) const;
  // initial density plus all transition densities of a full trajectory
  double path_log_density(const Vec& trajectory) const;
};

struct ParticleSystem {
  Mat states;        // P x K
  Mat log_weights;   // unnormalized log omega-hat
  Mat norm_weights;  // columns sum to 1
  IMat ancestry;     // ancestry(p, k) = parent of particle p at step k
  double log_ml = 0.0;

  int n_particles() const { return static_cast<int>(states.rows()); }
  int n_total_steps() const { return static_cast<int>(states.cols()); }
  // follow the ancestry of final-step particle p back through all steps
  Vec trace_back(int p) const;
};

IVec systematic_resample(const Vec& norm_weights, Rng& rng);

struct PfResult {
  ParticleSystem sys;
  Vec trajectory;  // one draw proportional to the final weights
};

// Bootstrap filter: propose from the transition, weight by the window
// likelihood, resample systematically every step. log_ml accumulates
// sum_k log(mean of unnormalized weights).
PfResult particle_filter(const WeightTransition& trans, const WindowObs& obs, int n_particles,
                         Rng& rng);

// Conditional particle filter with ancestor sampling: particle 0 is pinned to
// the reference; free particles resample multinomially; the reference's
// ancestor is drawn with probability proportional to
// w_{k-1} * f(ref_k | state_{k-1}). Deterministic transitions (noise_std 0)
// degenerate ancestor sampling, detected and replaced by keeping the
// reference's own history (plain conditional SMC).
Vec conditional_particle_filter_as(const Vec& reference, const WeightTransition& trans,
                                   const WindowObs& obs, int n_particles, Rng& rng);

struct EdgeSample {
  bool present = false;
  Vec trajectory;  // empty when absent
  double log_z1 = 0.0;
  double log_z0 = 0.0;
};

// Collapsed spike-and-slab draw for one synapse: estimate the edge evidence
// with a particle filter, compute the no-edge evidence exactly at weight 0,
// then sample the indicator from rho*Z1 / (rho*Z1 + (1-rho)*Z0) in log space.
EdgeSample collapsed_edge_sample(double prior_rho, const WeightTransition& trans,
                                 const WindowObs& obs, int n_particles, Rng& rng);

// Observation with no information about the weight (constant likelihood).
struct FlatObs final : WindowObs {
  int steps = 0;
  explicit FlatObs(int n) : steps(n) {}
  int n_steps() const override { return steps; }
  double log_lik(int, double) const override { return 0.0; }
  void log_lik_batch(int, const Arr& w, Arr& out) const override { out = Arr::Zero(w.size()); }
};

}  // namespace plasticnet
