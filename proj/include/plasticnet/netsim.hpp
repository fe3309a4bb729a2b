#pragma once

#include <optional>
#include <string>

#include "plasticnet/basis.hpp"
#include "plasticnet/common.hpp"
#include "plasticnet/grid.hpp"
#include "plasticnet/model.hpp"
#include "plasticnet/plasticity.hpp"
#include "plasticnet/rng.hpp"
#include "plasticnet/spikes.hpp"

namespace plasticnet {

struct SimConfig {
  int n_neurons = 2;
  TimeGrid grid{60.0};
  double sparsity = 0.1;
  LearningRuleParams rule;
  double bias_mean_hz = 20.0;
  double bias_std_hz = 5.0;
  DistSpec init_weight = DistSpec::Uniform(0.0, 1.0);
  DistSpec self_weight = DistSpec::Normal(-1.0, 0.5);
  int n_basis = 6;
  double lag_max_s = 0.1;
  LinkKind link = LinkKind::exp_link;
  // overrides the Bernoulli(sparsity) draw; diagonal entries set the self edges
  std::optional<IMat> fixed_adjacency;
  uint64_t seed = 0;

  void validate() const;
};

struct SampledNetwork {
  NetworkState net;
  GlmParams glm;
};

// Erdos-Renyi adjacency, self edges always present, biases matched to the
// configured baseline rate through the link, per-pair kernel mixtures from
// Dirichlet(alpha=1), initial weights from init_weight (rejected into the
// bounds for bounded rules).
SampledNetwork sample_network(const SimConfig& cfg, Rng& rng);

struct SimResult {
  SpikeData spikes;
  Mat weights;  // (N*N) x K ground-truth trajectories
};

// Forward simulation on the fine grid: Poisson counts per bin from the
// incrementally maintained drive, spike times placed uniformly inside their
// bin, and weight transitions applied at every coarse boundary from the
// exponential-trace STDP sums. Aborts if any rate crosses the ceiling.
SimResult simulate(const SimConfig& cfg, const NetworkState& net, const GlmParams& params,
                   Rng& rng);

// Canned configurations: two_neuron_{static,additive,multiplicative} and
// ten_neuron_additive (sparsity 28/90, bounded additive rule).
SimConfig make_paper_experiment(const std::string& name);

}  // namespace plasticnet
