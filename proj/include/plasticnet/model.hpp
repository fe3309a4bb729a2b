#pragma once

#include <vector>

#include "plasticnet/common.hpp"
#include "plasticnet/features.hpp"
#include "plasticnet/grid.hpp"
#include "plasticnet/obs.hpp"
#include "plasticnet/spikes.hpp"

namespace plasticnet {

inline constexpr double kRateFloorHz = 1e-12;
inline constexpr double kRateCeilingHz = 1e8;

enum class LinkKind { exp_link, softplus };

double apply_link(LinkKind link, double a);       // floor applied, no ceiling
double link_inverse(LinkKind link, double rate);  // rate > 0
double link_deriv(LinkKind link, double a);       // g'(a)
// g applied elementwise with floor and ceiling
Arr apply_link_clamped(LinkKind link, const Arr& a);

inline int pair_index(int pre, int post, int n_neurons) { return pre * n_neurons + post; }

// Expanded-mean simplex parameterization of the per-pair kernel mixture:
// beta_b = theta_raw_b / sum(theta_raw), computed on demand so the simplex
// constraint holds by construction.
struct ImpulseCoeffs {
  Mat theta_raw;       // B x N*N, strictly positive; column = pair_index
  double alpha = 1.0;  // Dirichlet concentration

  int n_basis() const { return static_cast<int>(theta_raw.rows()); }
  Vec beta_pair(int pair) const {
    Vec th = theta_raw.col(pair);
    return th / th.sum();
  }
  Mat beta() const;
};

struct GlmParams {
  Vec bias;             // per neuron, on the pre-link scale
  Mat stim_coeffs;      // (D*S) x N; empty without stimulus
  ImpulseCoeffs impulse;
  Vec self_weight;      // static self-interaction weight per neuron
  IVec self_edge;       // 0/1 per neuron
  LinkKind link = LinkKind::exp_link;

  int n_neurons() const { return static_cast<int>(bias.size()); }
};

// Adjacency and piecewise-constant weight trajectories for the off-diagonal
// synapses. Diagonal adjacency entries mirror GlmParams::self_edge for
// serialization; all rate computations take the self term from GlmParams.
// weights may cover fewer coarse steps than the grid when fitting a prefix.
struct NetworkState {
  IMat adjacency;   // N x N, adjacency(pre, post)
  Mat weights;      // (N*N) x K, row = pair_index, column = coarse step
  double sparsity = 0.1;

  int n_neurons() const { return static_cast<int>(adjacency.rows()); }
  int n_steps() const { return static_cast<int>(weights.cols()); }
};

// Pre-link drive a_n[t] = b_n + stimulus term + summed synaptic filter drive,
// for fine bins in coarse windows [k_begin, k_end).
Mat activations(const GlmParams& params, const NetworkState& net, const FilteredFeatures& feats,
                const TimeGrid& grid, int k_begin, int k_end);

struct RateResult {
  Mat rates;  // n_fine x N, Hz
  bool saturated = false;  // some bin hit the rate ceiling
};

RateResult conditional_rate(const GlmParams& params, const NetworkState& net,
                            const FilteredFeatures& feats, const TimeGrid& grid);

// Discretized point-process log likelihood: sum over fine bins of the Poisson
// log-pmf of the observed counts with mean rate*fine_dt, over coarse windows
// [k_begin, k_end) (the full grid when k_end < 0), summed over neurons.
double log_likelihood(const Mat& rates, const SpikeData& spikes, const TimeGrid& grid,
                      int k_begin = 0, int k_end = -1);

// Same likelihood from the pre-link drive restricted to coarse windows
// [k_begin, k_end): act has one row per fine bin of the span.
double span_log_likelihood(const Mat& act, LinkKind link, const SpikeData& spikes,
                           const TimeGrid& grid, int k_begin, int k_end);

// Normalized kernel drive of one ordered pair over the span: the convex
// combination of the presynaptic features under the pair's beta vector.
Arr pair_kernel_drive(int pre, int post, const GlmParams& params, const FilteredFeatures& feats,
                      const TimeGrid& grid, int k_begin, int k_end);

// Log likelihood of one postsynaptic neuron's spikes over coarse windows as a
// function of a single synapse's weight, everything else fixed. Splits each
// window into bins the synapse can influence (kernel drive != 0) and a
// constant remainder, so repeated evaluation at many candidate weights only
// touches the active bins.
class SynapseObs final : public WindowObs {
 public:
  int n_steps() const override { return static_cast<int>(windows_.size()); }
  double log_lik(int k, double w) const override;
  void log_lik_batch(int k, const Arr& w, Arr& out) const override;
  double log_lik_zero() const;             // sum over windows at w = 0
  double total_log_lik(double w) const;    // same weight in every window
  const Arr& kernel_drive() const { return psi_; }

 private:
  friend SynapseObs make_synapse_obs(int, int, const GlmParams&, const NetworkState&,
                                     const FilteredFeatures&, const SpikeData&, const TimeGrid&,
                                     int, int, const Vec*);
  struct Window {
    Arr base;               // drive without this synapse, active bins only
    Arr psi;                // kernel drive, active bins only
    std::vector<int> spike_pos;  // indices into the active arrays
    Arr spike_count;
    double const_term = 0.0;  // inactive-bin likelihood + count normalizers
  };
  LinkKind link_;
  double dt_ = 0.0;
  Arr psi_;  // kernel drive over the fit span (diagnostics/incremental updates)
  std::vector<Window> windows_;
};

// Build the observation for synapse (pre -> post); pre == post selects the
// static self-interaction. base_activation, when given, is neuron post's full
// drive over windows [k_begin, k_end) including the synapse's current
// contribution (removed internally using net/params); otherwise it is rebuilt.
SynapseObs make_synapse_obs(int pre, int post, const GlmParams& params, const NetworkState& net,
                            const FilteredFeatures& feats, const SpikeData& spikes,
                            const TimeGrid& grid, int k_begin, int k_end,
                            const Vec* base_activation = nullptr);

// Spec'd scalar entry point: log likelihood of neuron post's spikes over
// coarse window k with the (pre -> post) weight set to candidate_weight.
double window_log_likelihood(const SynapseObs& obs, int k, double candidate_weight);

}  // namespace plasticnet
