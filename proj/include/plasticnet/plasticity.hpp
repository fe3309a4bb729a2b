#pragma once

#include <span>
#include <vector>

#include "plasticnet/common.hpp"
#include "plasticnet/rng.hpp"

namespace plasticnet {

enum class RuleKind { static_rule, additive, additive_bounded, multiplicative };

bool rule_is_bounded(RuleKind kind);
bool rule_is_stdp(RuleKind kind);  // everything except static

struct LearningRuleParams {
  RuleKind kind = RuleKind::static_rule;
  double a_plus = 0.01;
  double tau_plus = 0.02;
  double a_minus = 0.005;
  double tau_minus = 0.02;
  double w_max = 1.0;
  double w_min = -1.0;
  double noise_std = 0.0;  // per sqrt(second)

  void validate() const;
};

// Potentiation and depression sums accumulated over one coarse window.
struct StdpUpdate {
  double l_plus = 0.0;
  double l_minus = 0.0;
};

// Exponential trace state carried across consecutive windows: pre-spike
// traces decay with tau_plus, post-spike traces with tau_minus. Value-passed
// so concurrent synapses never share state. cursor marks how far the event
// lists have been consumed.
struct StdpTraces {
  double pre_trace = 0.0;
  double post_trace = 0.0;
  double pre_t = 0.0;
  double post_t = 0.0;
  size_t next_pre = 0;
  size_t next_post = 0;
};

// Accumulate over [t_begin, t_end) continuing from carried traces; every
// prior spike contributes through the traces, only triggers inside the window
// add to the sums. Calls must advance t_end monotonically for a given traces
// object. Simultaneous pre/post spikes see each other's trace values from
// strictly earlier spikes only.
StdpUpdate accumulate_stdp(std::span<const double> pre_spikes, std::span<const double> post_spikes,
                           double t_begin, double t_end, const LearningRuleParams& params,
                           StdpTraces& traces);

// One-shot form: traces start empty at the head of the event lists, so spikes
// before t_begin feed the traces but trigger nothing.
StdpUpdate accumulate_stdp(std::span<const double> pre_spikes, std::span<const double> post_spikes,
                           double t_begin, double t_end, const LearningRuleParams& params);

// Noiseless next weight. Additive adds l_plus - l_minus; the bounded variant
// clips the result; multiplicative scales min(l,1) by the distance to each
// bound. coarse_dt is carried by the callers that own the grid.
double transition_mean(double w, const StdpUpdate& update, const LearningRuleParams& params);

// transition_mean plus Gaussian noise with std noise_std*sqrt(coarse_dt),
// truncated to [w_min, w_max] for bounded kinds. noise_std = 0 degenerates to
// the mean exactly.
double sample_transition(double w, const StdpUpdate& update, const LearningRuleParams& params,
                         double coarse_dt, Rng& rng);

// Exact log density of sample_transition, including the truncation
// normalizer. With noise_std = 0 this is the documented degenerate case:
// 0 when w_next equals the mean, -infinity otherwise.
double transition_log_density(double w_next, double w, const StdpUpdate& update,
                              const LearningRuleParams& params, double coarse_dt);

}  // namespace plasticnet
