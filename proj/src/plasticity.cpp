#include "plasticnet/plasticity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "plasticnet/math.hpp"

namespace plasticnet {

bool rule_is_bounded(RuleKind kind) {
  return kind == RuleKind::additive_bounded || kind == RuleKind::multiplicative;
}

bool rule_is_stdp(RuleKind kind) { return kind != RuleKind::static_rule; }

void LearningRuleParams::validate() const {
  if (rule_is_stdp(kind)) {
    if (!(a_plus > 0.0) || !(a_minus > 0.0) || !(tau_plus > 0.0) || !(tau_minus > 0.0) ||
        !(noise_std > 0.0))
      throw param_error("LearningRuleParams: STDP kinds need positive amplitudes, time constants, and noise");
  } else if (noise_std < 0.0) {
    throw param_error("LearningRuleParams: noise_std must be nonnegative");
  }
  if (rule_is_bounded(kind) && !(w_max > 0.0 && 0.0 > w_min))
    throw param_error("LearningRuleParams: bounded kinds need w_max > 0 > w_min");
}

StdpUpdate accumulate_stdp(std::span<const double> pre_spikes, std::span<const double> post_spikes,
                           double t_begin, double t_end, const LearningRuleParams& params,
                           StdpTraces& tr) {
  StdpUpdate upd;
  size_t& ip = tr.next_pre;
  size_t& iq = tr.next_post;
  while (true) {
    bool has_pre = ip < pre_spikes.size() && pre_spikes[ip] < t_end;
    bool has_post = iq < post_spikes.size() && post_spikes[iq] < t_end;
    if (!has_pre && !has_post) break;
    double u;
    if (has_pre && has_post)
      u = std::min(pre_spikes[ip], post_spikes[iq]);
    else
      u = has_pre ? pre_spikes[ip] : post_spikes[iq];

    int n_pre = 0, n_post = 0;
    while (ip < pre_spikes.size() && pre_spikes[ip] == u) ++ip, ++n_pre;
    while (iq < post_spikes.size() && post_spikes[iq] == u) ++iq, ++n_post;

    // trace values just before u: ties contribute nothing to each other
    double pre_val = tr.pre_trace * std::exp(-(u - tr.pre_t) / params.tau_plus);
    double post_val = tr.post_trace * std::exp(-(u - tr.post_t) / params.tau_minus);
    if (u >= t_begin) {
      upd.l_plus += n_post * params.a_plus * pre_val;
      upd.l_minus += n_pre * params.a_minus * post_val;
    }
    tr.pre_trace = pre_val + n_pre;
    tr.pre_t = u;
    tr.post_trace = post_val + n_post;
    tr.post_t = u;
  }
  return upd;
}

StdpUpdate accumulate_stdp(std::span<const double> pre_spikes, std::span<const double> post_spikes,
                           double t_begin, double t_end, const LearningRuleParams& params) {
  StdpTraces tr;
  return accumulate_stdp(pre_spikes, post_spikes, t_begin, t_end, params, tr);
}

namespace {
void check_in_bounds(double w, const LearningRuleParams& p, const char* who) {
  if (w < p.w_min || w > p.w_max)
    throw numeric_error(std::string(who) + ": weight outside [w_min, w_max] for a bounded rule");
}
}  // namespace

double transition_mean(double w, const StdpUpdate& update, const LearningRuleParams& params) {
  switch (params.kind) {
    case RuleKind::static_rule:
      return w;
    case RuleKind::additive:
      return w + update.l_plus - update.l_minus;
    case RuleKind::additive_bounded: {
      check_in_bounds(w, params, "transition_mean");
      double m = w + update.l_plus - update.l_minus;
      return std::min(std::max(m, params.w_min), params.w_max);
    }
    case RuleKind::multiplicative: {
      check_in_bounds(w, params, "transition_mean");
      double lp = std::min(update.l_plus, 1.0);
      double lm = std::min(update.l_minus, 1.0);
      return w + lp * (params.w_max - w) - lm * (w - params.w_min);
    }
  }
  throw param_error("transition_mean: unknown rule kind");
}

double sample_transition(double w, const StdpUpdate& update, const LearningRuleParams& params,
                         double coarse_dt, Rng& rng) {
  double m = transition_mean(w, update, params);
  double sd = params.noise_std * std::sqrt(coarse_dt);
  if (sd == 0.0) return m;
  if (rule_is_bounded(params.kind))
    return draw_truncated_normal(rng, m, sd, params.w_min, params.w_max);
  return draw_normal(rng, m, sd);
}

double transition_log_density(double w_next, double w, const StdpUpdate& update,
                              const LearningRuleParams& params, double coarse_dt) {
  double m = transition_mean(w, update, params);
  double sd = params.noise_std * std::sqrt(coarse_dt);
  if (sd == 0.0) return w_next == m ? 0.0 : -std::numeric_limits<double>::infinity();
  if (rule_is_bounded(params.kind)) {
    if (w_next < params.w_min || w_next > params.w_max)
      return -std::numeric_limits<double>::infinity();
    return normal_log_pdf(w_next, m, sd) -
           norm_log_interval((params.w_min - m) / sd, (params.w_max - m) / sd);
  }
  return normal_log_pdf(w_next, m, sd);
}

}  // namespace plasticnet
