#include "plasticnet/smc.hpp"

#include <cmath>
#include <sstream>

#include "plasticnet/math.hpp"

namespace plasticnet {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double WeightTransition::sample_initial(Rng& rng) const {
  if (!rule_is_bounded(rule.kind)) return init.sample(rng);
  switch (init.kind) {
    case DistSpec::Kind::constant:
      if (init.a < rule.w_min || init.a > rule.w_max)
        throw param_error("WeightTransition: constant initial weight outside rule bounds");
      return init.a;
    case DistSpec::Kind::uniform: {
      double lo = std::max(init.a, rule.w_min), hi = std::min(init.b, rule.w_max);
      if (!(lo < hi))
        throw param_error("WeightTransition: uniform initial weight has no mass inside bounds");
      return draw_uniform(rng, lo, hi);
    }
    case DistSpec::Kind::normal:
      return draw_truncated_normal(rng, init.a, init.b, rule.w_min, rule.w_max);
  }
  throw param_error("WeightTransition: unknown initial distribution");
}

double WeightTransition::log_density_initial(double w) const {
  if (!rule_is_bounded(rule.kind)) return init.log_pdf(w);
  if (w < rule.w_min || w > rule.w_max) return -kInf;
  switch (init.kind) {
    case DistSpec::Kind::constant:
      return w == init.a ? 0.0 : -kInf;
    case DistSpec::Kind::uniform: {
      double lo = std::max(init.a, rule.w_min), hi = std::min(init.b, rule.w_max);
      if (!(lo < hi) || w < lo || w > hi) return -kInf;
      return -std::log(hi - lo);
    }
    case DistSpec::Kind::normal:
      return normal_log_pdf(w, init.a, init.b) -
             norm_log_interval((rule.w_min - init.a) / init.b, (rule.w_max - init.a) / init.b);
  }
  throw param_error("WeightTransition: unknown initial distribution");
}

double WeightTransition::sample_step(int k, double w, Rng& rng) const {
  return sample_transition(w, updates.at(static_cast<size_t>(k) - 1), rule, coarse_dt, rng);
}

double WeightTransition::log_density_step(int k, double w_next, double w) const {
  return transition_log_density(w_next, w, updates.at(static_cast<size_t>(k) - 1), rule, coarse_dt);
}

double WeightTransition::path_log_density(const Vec& trajectory) const {
  if (trajectory.size() != n_steps())
    throw param_error("WeightTransition: trajectory length mismatch");
  double total = log_density_initial(trajectory[0]);
  for (int k = 1; k < n_steps(); ++k) total += log_density_step(k, trajectory[k], trajectory[k - 1]);
  return total;
}

Vec ParticleSystem::trace_back(int p) const {
  const int K = n_total_steps();
  Vec traj(K);
  int idx = p;
  traj[K - 1] = states(idx, K - 1);
  for (int k = K - 1; k > 0; --k) {
    idx = ancestry(idx, k);
    traj[k - 1] = states(idx, k - 1);
  }
  return traj;
}

IVec systematic_resample(const Vec& norm_weights, Rng& rng) {
  const int P = static_cast<int>(norm_weights.size());
  IVec idx(P);
  double u = draw_uniform(rng);
  double cum = norm_weights[0];
  int j = 0;
  for (int i = 0; i < P; ++i) {
    double target = (i + u) / P;
    while (cum < target && j + 1 < P) cum += norm_weights[++j];
    idx[i] = j;
  }
  return idx;
}

namespace {

// normalize one column of log weights; returns log(mean exp(lw))
double normalize_step(const Arr& lw, Vec& out_norm, int step) {
  double m = lw.maxCoeff();
  if (m == -kInf) {
    std::ostringstream msg;
    msg << "particle filter degenerate: all weights vanished at step " << step;
    throw numeric_error(msg.str());
  }
  Arr w = (lw - m).exp();
  double s = w.sum();
  out_norm = (w / s).matrix();
  return m + std::log(s) - std::log(static_cast<double>(lw.size()));
}

ParticleSystem init_system(int P, int K) {
  ParticleSystem sys;
  sys.states.resize(P, K);
  sys.log_weights.resize(P, K);
  sys.norm_weights.resize(P, K);
  sys.ancestry.resize(P, K);
  for (int p = 0; p < P; ++p) sys.ancestry(p, 0) = p;
  return sys;
}

}  // namespace

PfResult particle_filter(const WeightTransition& trans, const WindowObs& obs, int n_particles,
                         Rng& rng) {
  const int P = n_particles;
  const int K = trans.n_steps();
  if (P < 1) throw param_error("particle_filter: need at least one particle");
  if (obs.n_steps() != K) throw param_error("particle_filter: observation/transition length mismatch");

  PfResult res;
  ParticleSystem& sys = res.sys = init_system(P, K);
  sys.log_ml = 0.0;

  Arr lw(P);
  Vec norm(P);
  Arr ws(P);
  for (int p = 0; p < P; ++p) sys.states(p, 0) = trans.sample_initial(rng);
  ws = sys.states.col(0).array();
  obs.log_lik_batch(0, ws, lw);
  sys.log_ml += normalize_step(lw, norm, 0);
  sys.log_weights.col(0) = lw.matrix();
  sys.norm_weights.col(0) = norm;

  for (int k = 1; k < K; ++k) {
    IVec parents = systematic_resample(norm, rng);
    for (int p = 0; p < P; ++p) {
      sys.ancestry(p, k) = parents[p];
      sys.states(p, k) = trans.sample_step(k, sys.states(parents[p], k - 1), rng);
    }
    ws = sys.states.col(k).array();
    obs.log_lik_batch(k, ws, lw);
    sys.log_ml += normalize_step(lw, norm, k);
    sys.log_weights.col(k) = lw.matrix();
    sys.norm_weights.col(k) = norm;
  }

  int pick = draw_categorical(rng, norm.array());
  res.trajectory = sys.trace_back(pick);
  return res;
}

Vec conditional_particle_filter_as(const Vec& reference, const WeightTransition& trans,
                                   const WindowObs& obs, int n_particles, Rng& rng) {
  const int P = n_particles;
  const int K = trans.n_steps();
  if (P < 2) throw param_error("conditional_particle_filter_as: need at least two particles");
  if (static_cast<int>(reference.size()) != K)
    throw param_error("conditional_particle_filter_as: reference length mismatch");
  if (obs.n_steps() != K)
    throw param_error("conditional_particle_filter_as: observation/transition length mismatch");
  if (rule_is_bounded(trans.rule.kind))
    for (int k = 0; k < K; ++k)
      if (reference[k] < trans.rule.w_min || reference[k] > trans.rule.w_max)
        throw param_error("conditional_particle_filter_as: reference outside rule support");

  ParticleSystem sys = init_system(P, K);
  const bool degenerate = trans.deterministic();

  Arr lw(P);
  Vec norm(P);
  Arr ws(P);
  sys.states(0, 0) = reference[0];
  for (int p = 1; p < P; ++p) sys.states(p, 0) = trans.sample_initial(rng);
  ws = sys.states.col(0).array();
  obs.log_lik_batch(0, ws, lw);
  normalize_step(lw, norm, 0);
  sys.norm_weights.col(0) = norm;

  for (int k = 1; k < K; ++k) {
    // reference ancestor first, in a fixed draw order
    int a0 = 0;
    if (!degenerate) {
      Arr as_lw(P);
      for (int p = 0; p < P; ++p)
        as_lw[p] = std::log(norm[p]) + trans.log_density_step(k, reference[k], sys.states(p, k - 1));
      double m = as_lw.maxCoeff();
      if (m > -kInf) {
        Arr as_w = (as_lw - m).exp();
        a0 = draw_categorical(rng, as_w);
      }
    }
    sys.ancestry(0, k) = a0;
    sys.states(0, k) = reference[k];
    for (int p = 1; p < P; ++p) {
      int parent = draw_categorical(rng, norm.array());
      sys.ancestry(p, k) = parent;
      sys.states(p, k) = trans.sample_step(k, sys.states(parent, k - 1), rng);
    }
    ws = sys.states.col(k).array();
    obs.log_lik_batch(k, ws, lw);
    normalize_step(lw, norm, k);
    sys.norm_weights.col(k) = norm;
  }

  int pick = draw_categorical(rng, norm.array());
  return sys.trace_back(pick);
}

EdgeSample collapsed_edge_sample(double prior_rho, const WeightTransition& trans,
                                 const WindowObs& obs, int n_particles, Rng& rng) {
  if (prior_rho < 0.0 || prior_rho > 1.0)
    throw param_error("collapsed_edge_sample: rho outside [0,1]");
  EdgeSample out;
  out.log_z0 = 0.0;
  for (int k = 0; k < obs.n_steps(); ++k) out.log_z0 += obs.log_lik(k, 0.0);

  if (prior_rho == 0.0) {
    out.present = false;
    out.log_z1 = -kInf;
    return out;
  }

  PfResult pf = particle_filter(trans, obs, n_particles, rng);
  out.log_z1 = pf.sys.log_ml;

  double log_on = std::log(prior_rho) + out.log_z1;
  double log_off = prior_rho == 1.0 ? -kInf : std::log1p(-prior_rho) + out.log_z0;
  double denom = log_add_exp(log_on, log_off);
  if (denom == -kInf)
    throw numeric_error("collapsed_edge_sample: both edge evidences vanished");

  double p_on = std::exp(log_on - denom);
  out.present = draw_uniform(rng) < p_on;
  if (out.present) out.trajectory = pf.trajectory;
  return out;
}

}  // namespace plasticnet
