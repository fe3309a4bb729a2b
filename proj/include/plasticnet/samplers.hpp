#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "plasticnet/basis.hpp"
#include "plasticnet/common.hpp"
#include "plasticnet/features.hpp"
#include "plasticnet/grid.hpp"
#include "plasticnet/math.hpp"
#include "plasticnet/model.hpp"
#include "plasticnet/plasticity.hpp"
#include "plasticnet/rng.hpp"
#include "plasticnet/smc.hpp"
#include "plasticnet/spikes.hpp"

namespace plasticnet {

struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
  double log_pdf(double x) const { return gamma_log_pdf(x, shape, rate); }
  double sample(Rng& rng) const { return draw_gamma(rng, shape, rate); }
  double mean() const { return shape / rate; }
};

struct PriorSpec {
  GammaPrior a_plus{1.0, 50.0};
  GammaPrior a_minus{1.0, 150.0};
  GammaPrior tau_plus{1.0, 100.0};
  GammaPrior tau_minus{1.0, 100.0};
  GammaPrior w_max{1.0, 1.0};
  GammaPrior w_min_neg{1.0, 100.0};  // prior on -w_min
  double self_weight_mean = -1.0;
  double self_weight_sd = 0.5;
  double self_edge_prob = 0.5;
  double sparsity = 0.1;  // rho for off-diagonal edges
  double dirichlet_alpha = 1.0;
  DistSpec init_weight = DistSpec::Normal(0.5, 0.5);  // weight at the first coarse step
  // the spec'd prior set stops at the parameters above; biases and stimulus
  // coefficients get normal priors here so the whole posterior is proper and
  // the flat-likelihood invariance check covers them too. NaN bias_mean picks
  // a link-dependent default (drive for ~20 Hz).
  double bias_mean = std::numeric_limits<double>::quiet_NaN();
  double bias_sd = 10.0;
  double stim_coeff_sd = 1.0;

  void validate() const;
};

// fills the NaN defaults for a concrete link choice
PriorSpec resolve_priors(PriorSpec priors, LinkKind link);

struct GibbsState {
  NetworkState net;
  GlmParams glm;
  LearningRuleParams rule;
  int iteration = 0;
  double log_posterior = 0.0;
};

// STDP sums with unit amplitudes for every coarse window of the fit range;
// scaled by the amplitude parameters when building transitions, so moving
// A+/A- never re-walks the event lists.
std::vector<StdpUpdate> raw_stdp_updates(const std::vector<double>& pre_events,
                                         const std::vector<double>& post_events,
                                         const TimeGrid& grid, int k_begin, int k_end,
                                         double tau_plus, double tau_minus);

// One univariate slice-sampling pass over the learning-rule parameters
// {A+, tau+, A-, tau-, and for bounded kinds W_max, W_min}, each against its
// prior plus the transition densities of all present trajectories. Static
// rules have no free parameters and return unchanged.
LearningRuleParams slice_sample_rule_params(const GibbsState& state, const SpikeData& spikes,
                                            const TimeGrid& grid, const PriorSpec& priors,
                                            int k_begin, int k_end, Rng& rng);

// HMC potential over the unconstrained GLM position
// (bias; stim coefficients; log theta_raw), with Jacobian-corrected gamma
// priors on theta_raw. Exposed for gradient verification.
class HmcProblem {
 public:
  HmcProblem(const GibbsState& state, const FilteredFeatures& feats, const SpikeData& spikes,
             const TimeGrid& grid, const PriorSpec& priors, int k_begin, int k_end,
             bool flat_likelihood);
  int dim() const { return dim_; }
  Vec pack(const GlmParams& params) const;
  void unpack(const Vec& x, GlmParams& params) const;
  double potential(const Vec& x) const;
  double potential_grad(const Vec& x, Vec& grad) const;

 private:
  const GibbsState& state_;
  const FilteredFeatures& feats_;
  const SpikeData& spikes_;
  const TimeGrid& grid_;
  PriorSpec priors_;
  int k_begin_, k_end_;
  bool flat_;
  int n_, n_basis_, n_stim_, dim_;
  double count_norm_;  // sum over fit bins of c*log(dt) - lgamma(c+1)
  // per neuron: (fine bin relative to the fit span, count), sorted by bin
  std::vector<std::vector<std::pair<int, double>>> spike_bins_;

  double eval(const Vec& x, Vec* grad) const;
};

struct HmcResult {
  bool accepted = false;
  bool divergent = false;
  double accept_prob = 0.0;
  double energy_error = 0.0;
};

// One leapfrog-HMC update of (bias, stim coefficients, theta_raw) in place.
HmcResult hmc_glm_params(GibbsState& state, const FilteredFeatures& feats, const SpikeData& spikes,
                         const TimeGrid& grid, const PriorSpec& priors, double step_size,
                         int n_leapfrog, int k_begin, int k_end, bool flat_likelihood, Rng& rng);

// Dual-averaging step-size adaptation (frozen after the adaptation window).
struct HmcAdapt {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  int t = 0;
  bool frozen = false;

  static HmcAdapt init(double step0);
  double eps() const { return std::exp(frozen ? log_eps_bar : log_eps); }
  void update(double accept_prob, double target);
  void freeze() { frozen = true; }
};

// Spike-and-slab update of one neuron's self edge and static self weight:
// the edge marginal integrates the weight with Gauss-Hermite quadrature
// against the normal prior; a present weight is refreshed by slice sampling
// seeded at the current value or the best quadrature abscissa.
// base_activation, when given, is the neuron's full drive over the fit span.
void sample_self_weight(int neuron, GibbsState& state, const FilteredFeatures& feats,
                        const SpikeData& spikes, const TimeGrid& grid, const PriorSpec& priors,
                        int k_begin, int k_end, bool flat_likelihood, Rng& rng,
                        const Vec* base_activation = nullptr);

// every log-prior term of the realized state (edges, trajectories, GLM
// parameters, rule parameters), recomputed from scratch
double log_prior(const GibbsState& state, const SpikeData& spikes, const TimeGrid& grid,
                 const PriorSpec& priors, int k_begin, int k_end);

struct GibbsOptions {
  RuleKind rule = RuleKind::additive;
  LinkKind link = LinkKind::exp_link;
  int n_particles = 100;
  int total_sweeps = 300;  // planned horizon; fixes the adaptation schedule
  double hmc_adapt_frac = 0.2;
  int hmc_leapfrog = 10;
  double hmc_step0 = 0.05;
  double hmc_target_accept = 0.8;
  std::optional<double> noise_std;  // default: 0 for static, 0.01 otherwise
  int k_begin = 0;
  int k_end = -1;  // -1: full grid
  bool flat_likelihood = false;
  int threads = 1;
  uint64_t seed = 0;

  double resolved_noise_std() const {
    if (noise_std) return *noise_std;
    return rule == RuleKind::static_rule ? 0.0 : 0.01;
  }
};

// Full chain record; enough state to resume a run exactly.
struct ChainRecord {
  int iteration = 0;
  double log_posterior = 0.0;
  IMat adjacency;
  Mat weights;
  LearningRuleParams rule;
  Vec bias;
  Mat theta_raw;
  Mat stim_coeffs;
  Vec self_weight;
  IVec self_edge;
  LinkKind link = LinkKind::exp_link;
  HmcAdapt hmc;
  long long hmc_divergences = 0;
};

using PosteriorChain = std::vector<ChainRecord>;

// Blocked Gibbs sampler: per sweep, (1) collapsed edge + conditional SMC
// trajectory updates for every ordered pair, (2) self edges/weights,
// (3) HMC over GLM parameters, (4) slice sampling of rule parameters.
// Stages (1)-(2) split across worker threads by postsynaptic neuron; every
// synapse owns a substream keyed by (sweep, pair), so results are identical
// for any thread count.
class GibbsEngine {
 public:
  GibbsEngine(SpikeData spikes, TimeGrid grid, BasisSet basis, PriorSpec priors,
              GibbsOptions options);

  void sweep();
  const GibbsState& state() const { return state_; }
  GibbsState& state() { return state_; }
  const GibbsOptions& options() const { return opt_; }
  const PriorSpec& priors() const { return priors_; }
  const FilteredFeatures& features() const { return feats_; }
  const TimeGrid& grid() const { return grid_; }
  const SpikeData& spikes() const { return spikes_; }
  int k_begin() const { return k_begin_; }
  int k_end() const { return k_end_; }
  long long hmc_divergences() const { return hmc_divergences_; }
  double hmc_step_size() const { return adapt_.eps(); }

  double fit_log_likelihood() const;  // current-state likelihood over the fit span
  double recompute_log_posterior() const;

  ChainRecord snapshot() const;
  void restore(const ChainRecord& record);

 private:
  SpikeData spikes_;
  TimeGrid grid_;
  BasisSet basis_;
  PriorSpec priors_;
  GibbsOptions opt_;
  FilteredFeatures feats_;
  GibbsState state_;
  Mat act_;  // fit-span drive, column per neuron, kept in step with the state
  HmcAdapt adapt_;
  long long hmc_divergences_ = 0;
  int k_begin_ = 0, k_end_ = 0;
  int adapt_until_ = 0;

  void init_from_prior();
  void rebuild_activation();
  void update_post_neuron(int post, int sweep_idx);
  void edge_move(int pre, int post, Rng& rng);
  void self_move(int post, Rng& rng);
  WeightTransition build_transition(int pre, int post) const;
};

// spec'd free-function form of one sweep
inline GibbsState gibbs_sweep(GibbsEngine& engine) {
  engine.sweep();
  return engine.state();
}

}  // namespace plasticnet
