#include "plasticnet/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <numbers>
#include <thread>

namespace plasticnet {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw param_error(std::string(what) + " must be positive");
}

void check_prob(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw param_error(std::string(what) + " must lie in [0, 1]");
}

// static partition of [0, n) across worker threads; exceptions are collected
// and the one from the lowest task index is rethrown
void parallel_over(int n_tasks, int n_threads, const std::function<void(int)>& fn) {
  if (n_threads <= 1 || n_tasks <= 1) {
    for (int i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  const int n_workers = std::min(n_threads, n_tasks);
  std::vector<std::exception_ptr> errors(static_cast<size_t>(n_tasks));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(n_workers));
  for (int tid = 0; tid < n_workers; ++tid) {
    pool.emplace_back([&, tid] {
      for (int i = tid; i < n_tasks; i += n_workers) {
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}
}  // namespace

void PriorSpec::validate() const {
  check_positive(a_plus.shape, "a_plus prior shape");
  check_positive(a_plus.rate, "a_plus prior rate");
  check_positive(a_minus.shape, "a_minus prior shape");
  check_positive(a_minus.rate, "a_minus prior rate");
  check_positive(tau_plus.shape, "tau_plus prior shape");
  check_positive(tau_plus.rate, "tau_plus prior rate");
  check_positive(tau_minus.shape, "tau_minus prior shape");
  check_positive(tau_minus.rate, "tau_minus prior rate");
  check_positive(w_max.shape, "w_max prior shape");
  check_positive(w_max.rate, "w_max prior rate");
  check_positive(w_min_neg.shape, "w_min prior shape");
  check_positive(w_min_neg.rate, "w_min prior rate");
  check_positive(self_weight_sd, "self_weight_sd");
  check_positive(bias_sd, "bias_sd");
  check_positive(stim_coeff_sd, "stim_coeff_sd");
  check_positive(dirichlet_alpha, "dirichlet_alpha");
  check_prob(self_edge_prob, "self_edge_prob");
  check_prob(sparsity, "sparsity");
  if (!std::isfinite(self_weight_mean)) throw param_error("self_weight_mean must be finite");
  if (!std::isfinite(bias_mean)) throw param_error("bias_mean must be finite (resolve first)");
  if (init_weight.kind == DistSpec::Kind::normal && !(init_weight.b > 0.0))
    throw param_error("init_weight sd must be positive");
  if (init_weight.kind == DistSpec::Kind::uniform && !(init_weight.a < init_weight.b))
    throw param_error("init_weight bounds must be ordered");
}

PriorSpec resolve_priors(PriorSpec priors, LinkKind link) {
  if (std::isnan(priors.bias_mean))
    priors.bias_mean = link == LinkKind::exp_link ? 3.0 : 15.0;  // ~20 Hz either way
  priors.validate();
  return priors;
}

std::vector<StdpUpdate> raw_stdp_updates(const std::vector<double>& pre_events,
                                         const std::vector<double>& post_events,
                                         const TimeGrid& grid, int k_begin, int k_end,
                                         double tau_plus, double tau_minus) {
  if (k_end < 0) k_end = grid.n_coarse;
  const int n_steps = k_end - k_begin;
  if (k_begin < 0 || k_end > grid.n_coarse || n_steps < 1)
    throw param_error("raw_stdp_updates: bad window range");
  LearningRuleParams unit;
  unit.kind = RuleKind::additive;
  unit.a_plus = 1.0;
  unit.a_minus = 1.0;
  unit.tau_plus = tau_plus;
  unit.tau_minus = tau_minus;
  unit.noise_std = 1.0;

  const double dtc = grid.coarse_dt_s;
  StdpTraces traces;
  // feed events before the fit range into the traces without triggering
  accumulate_stdp(pre_events, post_events, k_begin * dtc, k_begin * dtc, unit, traces);
  std::vector<StdpUpdate> out(static_cast<size_t>(n_steps - 1));
  for (int j = 0; j + 1 < n_steps; ++j)
    out[static_cast<size_t>(j)] = accumulate_stdp(pre_events, post_events, (k_begin + j) * dtc,
                                                  (k_begin + j + 1) * dtc, unit, traces);
  return out;
}

LearningRuleParams slice_sample_rule_params(const GibbsState& state, const SpikeData& spikes,
                                            const TimeGrid& grid, const PriorSpec& priors,
                                            int k_begin, int k_end, Rng& rng) {
  LearningRuleParams rule = state.rule;
  if (!rule_is_stdp(rule.kind)) return rule;
  // a noiseless STDP chain pins the parameters to a point mass; nothing to move
  if (rule.noise_std == 0.0) return rule;
  if (k_end < 0) k_end = grid.n_coarse;
  const int N = state.net.n_neurons();
  const int K = k_end - k_begin;
  const double dtc = grid.coarse_dt_s;

  struct EdgeData {
    int pre = 0, post = 0;
    Vec traj;
  };
  std::vector<EdgeData> edges;
  double traj_lo = std::numeric_limits<double>::infinity();
  double traj_hi = -std::numeric_limits<double>::infinity();
  for (int pre = 0; pre < N; ++pre)
    for (int post = 0; post < N; ++post) {
      if (pre == post || !state.net.adjacency(pre, post)) continue;
      EdgeData e;
      e.pre = pre;
      e.post = post;
      e.traj = state.net.weights.row(pair_index(pre, post, N)).segment(k_begin, K).transpose();
      traj_lo = std::min(traj_lo, e.traj.minCoeff());
      traj_hi = std::max(traj_hi, e.traj.maxCoeff());
      edges.push_back(std::move(e));
    }

  auto compute_raws = [&](double tp, double tm) {
    std::vector<std::vector<StdpUpdate>> all(edges.size());
    for (size_t i = 0; i < edges.size(); ++i)
      all[i] = raw_stdp_updates(spikes.events[edges[i].pre], spikes.events[edges[i].post], grid,
                                k_begin, k_end, tp, tm);
    return all;
  };
  std::vector<std::vector<StdpUpdate>> raws = compute_raws(rule.tau_plus, rule.tau_minus);

  auto path_density = [&](const LearningRuleParams& cand,
                          const std::vector<std::vector<StdpUpdate>>& rw) -> double {
    if (rule_is_bounded(cand.kind) && !edges.empty() &&
        (traj_hi > cand.w_max || traj_lo < cand.w_min))
      return kNegInf;
    WeightTransition env;
    env.rule = cand;
    env.coarse_dt = dtc;
    env.init = priors.init_weight;
    double total = 0.0;
    for (size_t i = 0; i < edges.size(); ++i) {
      const Vec& tr = edges[i].traj;
      total += env.log_density_initial(tr[0]);
      for (int k = 1; k < K; ++k) {
        StdpUpdate u{cand.a_plus * rw[i][static_cast<size_t>(k - 1)].l_plus,
                     cand.a_minus * rw[i][static_cast<size_t>(k - 1)].l_minus};
        total += transition_log_density(tr[k], tr[k - 1], u, cand, dtc);
      }
      if (total == kNegInf) return kNegInf;
    }
    return total;
  };

  {  // A+
    auto target = [&](double a) {
      if (!(a > 0.0)) return kNegInf;
      double lp = priors.a_plus.log_pdf(a);
      if (!std::isfinite(lp)) return kNegInf;
      LearningRuleParams cand = rule;
      cand.a_plus = a;
      return lp + path_density(cand, raws);
    };
    SliceOptions opt;
    opt.lo = 0.0;
    opt.width = std::max(priors.a_plus.mean(), 1e-4);
    rule.a_plus = slice_sample(target, rule.a_plus, opt, rng);
  }
  {  // tau+
    auto target = [&](double tp) {
      if (!(tp > 0.0)) return kNegInf;
      double lp = priors.tau_plus.log_pdf(tp);
      if (!std::isfinite(lp)) return kNegInf;
      LearningRuleParams cand = rule;
      cand.tau_plus = tp;
      return lp + path_density(cand, compute_raws(tp, rule.tau_minus));
    };
    SliceOptions opt;
    opt.lo = 0.0;
    opt.width = std::max(priors.tau_plus.mean(), 1e-4);
    rule.tau_plus = slice_sample(target, rule.tau_plus, opt, rng);
    raws = compute_raws(rule.tau_plus, rule.tau_minus);
  }
  {  // A-
    auto target = [&](double a) {
      if (!(a > 0.0)) return kNegInf;
      double lp = priors.a_minus.log_pdf(a);
      if (!std::isfinite(lp)) return kNegInf;
      LearningRuleParams cand = rule;
      cand.a_minus = a;
      return lp + path_density(cand, raws);
    };
    SliceOptions opt;
    opt.lo = 0.0;
    opt.width = std::max(priors.a_minus.mean(), 1e-4);
    rule.a_minus = slice_sample(target, rule.a_minus, opt, rng);
  }
  {  // tau-
    auto target = [&](double tm) {
      if (!(tm > 0.0)) return kNegInf;
      double lp = priors.tau_minus.log_pdf(tm);
      if (!std::isfinite(lp)) return kNegInf;
      LearningRuleParams cand = rule;
      cand.tau_minus = tm;
      return lp + path_density(cand, compute_raws(rule.tau_plus, tm));
    };
    SliceOptions opt;
    opt.lo = 0.0;
    opt.width = std::max(priors.tau_minus.mean(), 1e-4);
    rule.tau_minus = slice_sample(target, rule.tau_minus, opt, rng);
    raws = compute_raws(rule.tau_plus, rule.tau_minus);
  }
  if (rule_is_bounded(rule.kind)) {
    {  // W_max
      auto target = [&](double v) {
        if (!(v > 0.0) || v <= rule.w_min) return kNegInf;
        double lp = priors.w_max.log_pdf(v);
        if (!std::isfinite(lp)) return kNegInf;
        LearningRuleParams cand = rule;
        cand.w_max = v;
        return lp + path_density(cand, raws);
      };
      SliceOptions opt;
      opt.lo = 0.0;
      opt.width = std::max(priors.w_max.mean(), 0.05);
      rule.w_max = slice_sample(target, rule.w_max, opt, rng);
    }
    {  // W_min (negative support; prior is on -W_min)
      auto target = [&](double v) {
        if (!(v < 0.0) || v >= rule.w_max) return kNegInf;
        double lp = priors.w_min_neg.log_pdf(-v);
        if (!std::isfinite(lp)) return kNegInf;
        LearningRuleParams cand = rule;
        cand.w_min = v;
        return lp + path_density(cand, raws);
      };
      SliceOptions opt;
      opt.hi = 0.0;
      opt.width = std::max(priors.w_min_neg.mean(), 0.005);
      rule.w_min = slice_sample(target, rule.w_min, opt, rng);
    }
  }
  return rule;
}

HmcProblem::HmcProblem(const GibbsState& state, const FilteredFeatures& feats,
                       const SpikeData& spikes, const TimeGrid& grid, const PriorSpec& priors,
                       int k_begin, int k_end, bool flat_likelihood)
    : state_(state),
      feats_(feats),
      spikes_(spikes),
      grid_(grid),
      priors_(priors),
      k_begin_(k_begin),
      k_end_(k_end < 0 ? grid.n_coarse : k_end),
      flat_(flat_likelihood) {
  if (k_begin_ < 0 || k_end_ > grid.n_coarse || k_end_ <= k_begin_)
    throw param_error("HmcProblem: bad window range");
  n_ = state.glm.n_neurons();
  n_basis_ = state.glm.impulse.n_basis();
  n_stim_ = static_cast<int>(state.glm.stim_coeffs.rows());
  dim_ = n_ + n_stim_ * n_ + n_basis_ * n_ * n_;

  count_norm_ = 0.0;
  spike_bins_.assign(static_cast<size_t>(n_), {});
  const int b0 = grid.window_begin(k_begin_);
  const int b1 = grid.window_begin(k_end_);
  const double log_dt = std::log(grid.fine_dt_s);
  for (int n = 0; n < n_; ++n) {
    const auto& ev = spikes.events[static_cast<size_t>(n)];
    size_t i = 0;
    while (i < ev.size()) {
      int tau = grid.bin_of_time(ev[i]);
      size_t j = i + 1;
      while (j < ev.size() && grid.bin_of_time(ev[j]) == tau) ++j;
      if (tau >= b0 && tau < b1) {
        auto c = static_cast<double>(j - i);
        spike_bins_[static_cast<size_t>(n)].emplace_back(tau - b0, c);
        count_norm_ += c * log_dt - std::lgamma(c + 1.0);
      }
      i = j;
    }
  }
}

Vec HmcProblem::pack(const GlmParams& params) const {
  Vec x(dim_);
  x.head(n_) = params.bias;
  if (n_stim_ > 0)
    x.segment(n_, n_stim_ * n_) =
        Eigen::Map<const Vec>(params.stim_coeffs.data(), n_stim_ * n_);
  const int n_theta = n_basis_ * n_ * n_;
  x.tail(n_theta) =
      Eigen::Map<const Vec>(params.impulse.theta_raw.data(), n_theta).array().log().matrix();
  return x;
}

void HmcProblem::unpack(const Vec& x, GlmParams& params) const {
  params.bias = x.head(n_);
  if (n_stim_ > 0)
    Eigen::Map<Vec>(params.stim_coeffs.data(), n_stim_ * n_) = x.segment(n_, n_stim_ * n_);
  const int n_theta = n_basis_ * n_ * n_;
  Eigen::Map<Vec>(params.impulse.theta_raw.data(), n_theta) =
      x.tail(n_theta).array().exp().matrix();
}

double HmcProblem::eval(const Vec& x, Vec* grad) const {
  const int N = n_, B = n_basis_, S = n_stim_;
  if (x.size() != dim_) throw param_error("HmcProblem: position size mismatch");
  if (grad) grad->setZero(dim_);

  double U = 0.0;
  const auto bias = x.head(N);
  const double bvar = priors_.bias_sd * priors_.bias_sd;
  for (int n = 0; n < N; ++n) {
    U -= normal_log_pdf(bias[n], priors_.bias_mean, priors_.bias_sd);
    if (grad) (*grad)[n] += (bias[n] - priors_.bias_mean) / bvar;
  }
  const double svar = priors_.stim_coeff_sd * priors_.stim_coeff_sd;
  for (int i = 0; i < S * N; ++i) {
    U -= normal_log_pdf(x[N + i], 0.0, priors_.stim_coeff_sd);
    if (grad) (*grad)[N + i] += x[N + i] / svar;
  }
  const int th_off = N + S * N;
  const int n_theta = B * N * N;
  const double alpha = state_.glm.impulse.alpha;
  Arr xth = x.segment(th_off, n_theta).array();
  Arr exth = xth.exp();
  // log-scale gamma prior: alpha*x - exp(x) - lgamma(alpha), Jacobian included
  U -= (alpha * xth - exth).sum() - n_theta * std::lgamma(alpha);
  if (grad) grad->segment(th_off, n_theta) += (exth - alpha).matrix();
  if (!std::isfinite(U)) return std::numeric_limits<double>::infinity();
  if (flat_) return U;

  Mat theta = Eigen::Map<const Mat>(exth.data(), B, N * N);
  Vec colsum = theta.colwise().sum();

  const int fpc = grid_.fine_per_coarse;
  const int t0 = grid_.window_begin(k_begin_);
  const int len = (k_end_ - k_begin_) * fpc;
  const double dt = grid_.fine_dt_s;
  const LinkKind link = state_.glm.link;

  Mat stim_drive;
  if (S > 0)
    stim_drive = feats_.stim.middleRows(t0, len) * Eigen::Map<const Mat>(x.data() + N, S, N);

  double ll = count_norm_;
  Mat resid(len, N);
  Mat coupling(N * B, N);
  Mat act(fpc, N);
  Mat gk;
  std::vector<size_t> cursor(static_cast<size_t>(N), 0);

  for (int k = k_begin_; k < k_end_; ++k) {
    const int off = (k - k_begin_) * fpc;
    coupling.setZero();
    for (int post = 0; post < N; ++post)
      for (int pre = 0; pre < N; ++pre) {
        double w;
        if (pre == post) {
          if (!state_.glm.self_edge(post)) continue;
          w = state_.glm.self_weight(post);
        } else {
          if (!state_.net.adjacency(pre, post)) continue;
          w = state_.net.weights(pair_index(pre, post, N), k);
        }
        const int p = pair_index(pre, post, N);
        coupling.col(post).segment(pre * B, B) = (w / colsum[p]) * theta.col(p);
      }
    act.noalias() = feats_.impulse.middleRows(t0 + off, fpc) * coupling;
    act.rowwise() += bias.transpose();
    if (S > 0) act += stim_drive.middleRows(off, fpc);

    for (int n = 0; n < N; ++n) {
      Arr a = act.col(n).array();
      auto& bins = spike_bins_[static_cast<size_t>(n)];
      auto& cur = cursor[static_cast<size_t>(n)];
      if (link == LinkKind::exp_link) {
        Arr g = a.exp();
        ll -= dt * g.sum();
        resid.col(n).segment(off, fpc) = (-dt) * g.matrix();
        while (cur < bins.size() && bins[cur].first < off + fpc) {
          const auto [rb, c] = bins[cur++];
          ll += c * a[rb - off];
          resid(rb, n) += c;
        }
      } else {
        Arr sig = 0.5 * (0.5 * a).tanh() + 0.5;
        Arr g = a.max(0.0) + (-a.abs()).exp().log1p();
        ll -= dt * g.sum();
        resid.col(n).segment(off, fpc) = (-dt) * sig.matrix();
        while (cur < bins.size() && bins[cur].first < off + fpc) {
          const auto [rb, c] = bins[cur++];
          ll += c * std::log(g[rb - off]);
          resid(rb, n) += c * sig[rb - off] / g[rb - off];
        }
      }
    }

    if (grad) {
      gk.noalias() =
          feats_.impulse.middleRows(t0 + off, fpc).transpose() * resid.middleRows(off, fpc);
      for (int post = 0; post < N; ++post)
        for (int pre = 0; pre < N; ++pre) {
          double w;
          if (pre == post) {
            if (!state_.glm.self_edge(post)) continue;
            w = state_.glm.self_weight(post);
          } else {
            if (!state_.net.adjacency(pre, post)) continue;
            w = state_.net.weights(pair_index(pre, post, N), k);
          }
          const int p = pair_index(pre, post, N);
          auto v = gk.col(post).segment(pre * B, B);
          const double s = colsum[p];
          const double mix = theta.col(p).dot(v) / s;
          grad->segment(th_off + p * B, B).array() -=
              (w / s) * theta.col(p).array() * (v.array() - mix);
        }
    }
  }
  if (grad) {
    grad->head(N) -= resid.colwise().sum().transpose();
    if (S > 0) {
      Mat gs = feats_.stim.middleRows(t0, len).transpose() * resid;
      grad->segment(N, S * N) -= Eigen::Map<const Vec>(gs.data(), S * N);
    }
  }
  U -= ll;
  return U;
}

double HmcProblem::potential(const Vec& x) const { return eval(x, nullptr); }

double HmcProblem::potential_grad(const Vec& x, Vec& grad) const { return eval(x, &grad); }

HmcResult hmc_glm_params(GibbsState& state, const FilteredFeatures& feats, const SpikeData& spikes,
                         const TimeGrid& grid, const PriorSpec& priors, double step_size,
                         int n_leapfrog, int k_begin, int k_end, bool flat_likelihood, Rng& rng) {
  if (!(step_size > 0.0) || n_leapfrog < 1)
    throw param_error("hmc_glm_params: bad step size or leapfrog count");
  HmcProblem prob(state, feats, spikes, grid, priors, k_begin, k_end, flat_likelihood);
  const int dim = prob.dim();

  Vec x = prob.pack(state.glm);
  Vec p(dim);
  for (int i = 0; i < dim; ++i) p[i] = draw_normal(rng);

  Vec grad(dim);
  const double u0 = prob.potential_grad(x, grad);
  const double h0 = u0 + 0.5 * p.squaredNorm();

  Vec xn = x;
  double un = u0;
  bool blew_up = !std::isfinite(h0) || !grad.allFinite();
  if (!blew_up) {
    p -= 0.5 * step_size * grad;
    for (int l = 0; l < n_leapfrog; ++l) {
      xn += step_size * p;
      un = prob.potential_grad(xn, grad);
      if (!std::isfinite(un) || !grad.allFinite()) {
        blew_up = true;
        break;
      }
      if (l + 1 < n_leapfrog) p -= step_size * grad;
    }
    if (!blew_up) p -= 0.5 * step_size * grad;
  }

  HmcResult res;
  const double h1 =
      blew_up ? std::numeric_limits<double>::infinity() : un + 0.5 * p.squaredNorm();
  res.energy_error = h1 - h0;
  if (!std::isfinite(res.energy_error) || res.energy_error > 1000.0) {
    res.divergent = true;
    res.accept_prob = 0.0;
  } else {
    res.accept_prob = std::min(1.0, std::exp(-res.energy_error));
  }
  const double u = draw_uniform(rng);
  if (!res.divergent && u < res.accept_prob) {
    prob.unpack(xn, state.glm);
    res.accepted = true;
  }
  return res;
}

HmcAdapt HmcAdapt::init(double step0) {
  if (!(step0 > 0.0)) throw param_error("HmcAdapt: step0 must be positive");
  HmcAdapt a;
  a.log_eps = std::log(step0);
  a.log_eps_bar = std::log(step0);
  a.mu = std::log(10.0 * step0);
  return a;
}

void HmcAdapt::update(double accept_prob, double target) {
  if (frozen) return;
  ++t;
  constexpr double kGamma = 0.05, kT0 = 10.0, kKappa = 0.75;
  h_bar += (target - accept_prob - h_bar) / (t + kT0);
  log_eps = mu - std::sqrt(static_cast<double>(t)) / kGamma * h_bar;
  const double w = std::pow(static_cast<double>(t), -kKappa);
  log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
}

void sample_self_weight(int neuron, GibbsState& state, const FilteredFeatures& feats,
                        const SpikeData& spikes, const TimeGrid& grid, const PriorSpec& priors,
                        int k_begin, int k_end, bool flat_likelihood, Rng& rng,
                        const Vec* base_activation) {
  if (k_end < 0) k_end = grid.n_coarse;
  const double mu = priors.self_weight_mean;
  const double sd = priors.self_weight_sd;
  const double rho = priors.self_edge_prob;

  std::optional<SynapseObs> obs;
  if (!flat_likelihood)
    obs.emplace(make_synapse_obs(neuron, neuron, state.glm, state.net, feats, spikes, grid,
                                 k_begin, k_end, base_activation));
  auto loglik = [&](double w) { return obs ? obs->total_log_lik(w) : 0.0; };

  static const GaussHermite gh = gauss_hermite(20);
  const double sqrt2 = std::numbers::sqrt2;
  const int n_nodes = static_cast<int>(gh.nodes.size());
  Arr vals(n_nodes);
  double best_w = mu;
  double best_val = kNegInf;
  for (int i = 0; i < n_nodes; ++i) {
    const double wi = mu + sqrt2 * sd * gh.nodes[i];
    const double ll = loglik(wi);
    vals[i] = std::log(gh.weights[i]) + ll;
    const double integrand = normal_log_pdf(wi, mu, sd) + ll;
    if (integrand > best_val) {
      best_val = integrand;
      best_w = wi;
    }
  }
  const double log_z1 = log_sum_exp(vals) - 0.5 * std::log(std::numbers::pi);
  const double log_z0 = loglik(0.0);

  bool present;
  if (rho <= 0.0) {
    present = false;
  } else if (rho >= 1.0) {
    present = true;
  } else {
    const double log_on = std::log(rho) + log_z1;
    const double log_off = std::log1p(-rho) + log_z0;
    const double denom = log_add_exp(log_on, log_off);
    if (!std::isfinite(denom))
      throw numeric_error("sample_self_weight: degenerate edge posterior");
    present = std::log(draw_uniform(rng)) < log_on - denom;
  }

  double w_new;
  if (present) {
    const double x0 = state.glm.self_edge(neuron) ? state.glm.self_weight(neuron) : best_w;
    auto target = [&](double w) { return normal_log_pdf(w, mu, sd) + loglik(w); };
    SliceOptions opt;
    opt.width = sd;
    w_new = slice_sample(target, x0, opt, rng);
  } else {
    w_new = draw_normal(rng, mu, sd);
  }
  state.glm.self_edge(neuron) = present ? 1 : 0;
  state.glm.self_weight(neuron) = w_new;
  state.net.adjacency(neuron, neuron) = present ? 1 : 0;
}

double log_prior(const GibbsState& state, const SpikeData& spikes, const TimeGrid& grid,
                 const PriorSpec& priors, int k_begin, int k_end) {
  if (k_end < 0) k_end = grid.n_coarse;
  const int N = state.net.n_neurons();
  const int K = k_end - k_begin;
  double lp = 0.0;

  const auto& rule = state.rule;
  if (rule_is_stdp(rule.kind)) {
    lp += priors.a_plus.log_pdf(rule.a_plus) + priors.tau_plus.log_pdf(rule.tau_plus) +
          priors.a_minus.log_pdf(rule.a_minus) + priors.tau_minus.log_pdf(rule.tau_minus);
    if (rule_is_bounded(rule.kind))
      lp += priors.w_max.log_pdf(rule.w_max) + priors.w_min_neg.log_pdf(-rule.w_min);
  }

  const double rho = priors.sparsity;
  for (int pre = 0; pre < N; ++pre)
    for (int post = 0; post < N; ++post) {
      if (pre == post) continue;
      const bool on = state.net.adjacency(pre, post) != 0;
      if (rho > 0.0 && rho < 1.0)
        lp += on ? std::log(rho) : std::log1p(-rho);
      else if (on != (rho >= 1.0))
        lp = kNegInf;
      if (!on) continue;
      WeightTransition trans;
      trans.rule = rule;
      trans.coarse_dt = grid.coarse_dt_s;
      trans.init = priors.init_weight;
      if (rule_is_stdp(rule.kind)) {
        auto raw = raw_stdp_updates(spikes.events[static_cast<size_t>(pre)],
                                    spikes.events[static_cast<size_t>(post)], grid, k_begin, k_end,
                                    rule.tau_plus, rule.tau_minus);
        trans.updates.resize(raw.size());
        for (size_t j = 0; j < raw.size(); ++j)
          trans.updates[j] = {rule.a_plus * raw[j].l_plus, rule.a_minus * raw[j].l_minus};
      } else {
        trans.updates.assign(static_cast<size_t>(K - 1), StdpUpdate{});
      }
      Vec traj = state.net.weights.row(pair_index(pre, post, N)).segment(k_begin, K).transpose();
      lp += trans.path_log_density(traj);
    }

  const double rs = priors.self_edge_prob;
  for (int n = 0; n < N; ++n) {
    const bool on = state.glm.self_edge(n) != 0;
    if (rs > 0.0 && rs < 1.0)
      lp += on ? std::log(rs) : std::log1p(-rs);
    else if (on != (rs >= 1.0))
      lp = kNegInf;
    lp += normal_log_pdf(state.glm.self_weight(n), priors.self_weight_mean,
                         priors.self_weight_sd);
  }

  for (int n = 0; n < N; ++n)
    lp += normal_log_pdf(state.glm.bias[n], priors.bias_mean, priors.bias_sd);
  for (Eigen::Index i = 0; i < state.glm.stim_coeffs.size(); ++i)
    lp += normal_log_pdf(state.glm.stim_coeffs.data()[i], 0.0, priors.stim_coeff_sd);
  const double alpha = state.glm.impulse.alpha;
  const auto& th = state.glm.impulse.theta_raw;
  for (Eigen::Index i = 0; i < th.size(); ++i)
    lp += gamma_log_pdf(th.data()[i], alpha, 1.0);
  return lp;
}

GibbsEngine::GibbsEngine(SpikeData spikes, TimeGrid grid, BasisSet basis, PriorSpec priors,
                         GibbsOptions options)
    : spikes_(std::move(spikes)),
      grid_(grid),
      basis_(std::move(basis)),
      priors_(resolve_priors(std::move(priors), options.link)),
      opt_(options),
      feats_(precompute_features(spikes_, nullptr, basis_, grid_)) {
  if (spikes_.n_neurons < 1) throw param_error("GibbsEngine: no neurons");
  k_begin_ = opt_.k_begin;
  k_end_ = opt_.k_end < 0 ? grid_.n_coarse : opt_.k_end;
  if (k_begin_ < 0 || k_end_ > grid_.n_coarse || k_end_ <= k_begin_)
    throw param_error("GibbsEngine: bad fit window range");
  if (opt_.n_particles < 2) throw param_error("GibbsEngine: need at least two particles");
  if (opt_.total_sweeps < 1) throw param_error("GibbsEngine: total_sweeps must be positive");
  if (opt_.threads < 1) throw param_error("GibbsEngine: threads must be positive");
  if (opt_.resolved_noise_std() < 0.0) throw param_error("GibbsEngine: negative noise_std");
  if (rule_is_stdp(opt_.rule) && opt_.resolved_noise_std() == 0.0)
    throw param_error("GibbsEngine: plastic rules need noise_std > 0 to be identifiable");
  adapt_ = HmcAdapt::init(opt_.hmc_step0);
  adapt_until_ = static_cast<int>(std::ceil(opt_.hmc_adapt_frac * opt_.total_sweeps));
  init_from_prior();
}

void GibbsEngine::init_from_prior() {
  Rng rng = make_substream(opt_.seed, 0, 0, 99);
  const int N = spikes_.n_neurons;
  const int B = basis_.n_impulse_basis;

  LearningRuleParams rule;
  rule.kind = opt_.rule;
  rule.noise_std = opt_.resolved_noise_std();
  if (rule_is_stdp(rule.kind)) {
    rule.a_plus = priors_.a_plus.sample(rng);
    rule.tau_plus = priors_.tau_plus.sample(rng);
    rule.a_minus = priors_.a_minus.sample(rng);
    rule.tau_minus = priors_.tau_minus.sample(rng);
  }
  if (rule_is_bounded(rule.kind)) {
    rule.w_max = priors_.w_max.sample(rng);
    rule.w_min = -priors_.w_min_neg.sample(rng);
  }
  rule.validate();
  state_.rule = rule;

  GlmParams glm;
  glm.link = opt_.link;
  // biases start at the drive matching each neuron's empirical rate; every
  // other block starts from its prior
  glm.bias.resize(N);
  const double span_s = (k_end_ - k_begin_) * grid_.coarse_dt_s;
  const double lo_t = k_begin_ * grid_.coarse_dt_s;
  const double hi_t = k_end_ * grid_.coarse_dt_s;
  for (int n = 0; n < N; ++n) {
    const auto& ev = spikes_.events[static_cast<size_t>(n)];
    const auto in_span = std::count_if(ev.begin(), ev.end(),
                                       [&](double t) { return t >= lo_t && t < hi_t; });
    const double rate =
        std::clamp(static_cast<double>(in_span) / span_s, 0.5, 0.9 * kRateCeilingHz);
    glm.bias[n] = link_inverse(opt_.link, rate);
  }
  glm.impulse.alpha = priors_.dirichlet_alpha;
  glm.impulse.theta_raw.resize(B, N * N);
  for (Eigen::Index i = 0; i < glm.impulse.theta_raw.size(); ++i)
    glm.impulse.theta_raw.data()[i] = draw_gamma(rng, priors_.dirichlet_alpha, 1.0);
  glm.self_weight.resize(N);
  glm.self_edge.resize(N);
  for (int n = 0; n < N; ++n) {
    glm.self_weight[n] = draw_normal(rng, priors_.self_weight_mean, priors_.self_weight_sd);
    glm.self_edge[n] = draw_uniform(rng) < priors_.self_edge_prob ? 1 : 0;
  }
  state_.glm = std::move(glm);

  NetworkState net;
  net.sparsity = priors_.sparsity;
  net.adjacency.setZero(N, N);
  net.weights.setZero(N * N, k_end_);
  for (int pre = 0; pre < N; ++pre)
    for (int post = 0; post < N; ++post) {
      if (pre == post)
        net.adjacency(pre, post) = state_.glm.self_edge(pre);
      else
        net.adjacency(pre, post) = draw_uniform(rng) < priors_.sparsity ? 1 : 0;
    }
  state_.net = std::move(net);

  for (int pre = 0; pre < N; ++pre)
    for (int post = 0; post < N; ++post) {
      if (pre == post || !state_.net.adjacency(pre, post)) continue;
      WeightTransition trans = build_transition(pre, post);
      double w = trans.sample_initial(rng);
      state_.net.weights(pair_index(pre, post, N), k_begin_) = w;
      for (int k = k_begin_ + 1; k < k_end_; ++k) {
        w = trans.sample_step(k - k_begin_, w, rng);
        state_.net.weights(pair_index(pre, post, N), k) = w;
      }
    }

  state_.iteration = 0;
  rebuild_activation();
  state_.log_posterior = recompute_log_posterior();
}

void GibbsEngine::rebuild_activation() {
  if (opt_.flat_likelihood) {
    act_.resize(0, 0);
    return;
  }
  act_ = activations(state_.glm, state_.net, feats_, grid_, k_begin_, k_end_);
}

WeightTransition GibbsEngine::build_transition(int pre, int post) const {
  WeightTransition trans;
  trans.rule = state_.rule;
  trans.coarse_dt = grid_.coarse_dt_s;
  trans.init = priors_.init_weight;
  const int n_steps = k_end_ - k_begin_;
  if (!rule_is_stdp(state_.rule.kind)) {
    trans.updates.assign(static_cast<size_t>(n_steps - 1), StdpUpdate{});
  } else {
    auto raw = raw_stdp_updates(spikes_.events[static_cast<size_t>(pre)],
                                spikes_.events[static_cast<size_t>(post)], grid_, k_begin_, k_end_,
                                state_.rule.tau_plus, state_.rule.tau_minus);
    trans.updates.resize(raw.size());
    for (size_t j = 0; j < raw.size(); ++j)
      trans.updates[j] = {state_.rule.a_plus * raw[j].l_plus,
                          state_.rule.a_minus * raw[j].l_minus};
  }
  return trans;
}

void GibbsEngine::edge_move(int pre, int post, Rng& rng) {
  const int N = spikes_.n_neurons;
  const int p = pair_index(pre, post, N);
  const int K = k_end_ - k_begin_;
  const bool was = state_.net.adjacency(pre, post) != 0;

  WeightTransition trans = build_transition(pre, post);

  std::optional<SynapseObs> syn;
  std::optional<FlatObs> flat;
  const WindowObs* obs;
  Vec act_col;
  if (opt_.flat_likelihood) {
    flat.emplace(K);
    obs = &*flat;
  } else {
    act_col = act_.col(post);
    syn.emplace(make_synapse_obs(pre, post, state_.glm, state_.net, feats_, spikes_, grid_,
                                 k_begin_, k_end_, &act_col));
    obs = &*syn;
  }

  EdgeSample es = collapsed_edge_sample(state_.net.sparsity, trans, *obs, opt_.n_particles, rng);
  const bool present = es.present;
  Vec new_traj;
  if (present) {
    if (was) {
      Vec ref = state_.net.weights.row(p).segment(k_begin_, K).transpose();
      new_traj = conditional_particle_filter_as(ref, trans, *obs, opt_.n_particles, rng);
    } else {
      new_traj = es.trajectory;
    }
  }

  if (!opt_.flat_likelihood) {
    const Arr& psi = syn->kernel_drive();
    const int fpc = grid_.fine_per_coarse;
    for (int k = 0; k < K; ++k) {
      const double w_old = was ? state_.net.weights(p, k_begin_ + k) : 0.0;
      const double w_new = present ? new_traj[k] : 0.0;
      const double d = w_new - w_old;
      if (d != 0.0)
        act_.col(post).segment(k * fpc, fpc) += d * psi.segment(k * fpc, fpc).matrix();
    }
  }
  state_.net.adjacency(pre, post) = present ? 1 : 0;
  if (present)
    state_.net.weights.row(p).segment(k_begin_, K) = new_traj.transpose();
  else
    state_.net.weights.row(p).segment(k_begin_, K).setZero();
}

void GibbsEngine::self_move(int post, Rng& rng) {
  if (opt_.flat_likelihood) {
    sample_self_weight(post, state_, feats_, spikes_, grid_, priors_, k_begin_, k_end_, true, rng,
                       nullptr);
    return;
  }
  const double contrib_old = state_.glm.self_edge(post) * state_.glm.self_weight(post);
  Vec act_col = act_.col(post);
  sample_self_weight(post, state_, feats_, spikes_, grid_, priors_, k_begin_, k_end_, false, rng,
                     &act_col);
  const double contrib_new = state_.glm.self_edge(post) * state_.glm.self_weight(post);
  const double d = contrib_new - contrib_old;
  if (d != 0.0) {
    Arr psi = pair_kernel_drive(post, post, state_.glm, feats_, grid_, k_begin_, k_end_);
    act_.col(post) += (d * psi).matrix();
  }
}

void GibbsEngine::update_post_neuron(int post, int sweep_idx) {
  const int N = spikes_.n_neurons;
  const auto sweep = static_cast<uint64_t>(sweep_idx);
  for (int pre = 0; pre < N; ++pre) {
    if (pre == post) continue;
    Rng rng = make_substream(opt_.seed, sweep, static_cast<uint64_t>(pair_index(pre, post, N)), 0);
    edge_move(pre, post, rng);
  }
  Rng rng = make_substream(opt_.seed, sweep, static_cast<uint64_t>(post), 1);
  self_move(post, rng);
}

void GibbsEngine::sweep() {
  const int N = spikes_.n_neurons;
  const int s = state_.iteration + 1;

  parallel_over(N, opt_.threads, [&](int post) { update_post_neuron(post, s); });

  {
    if (s > adapt_until_) adapt_.freeze();
    Rng rng = make_substream(opt_.seed, static_cast<uint64_t>(s), 0, 2);
    HmcResult hr = hmc_glm_params(state_, feats_, spikes_, grid_, priors_, adapt_.eps(),
                                  opt_.hmc_leapfrog, k_begin_, k_end_, opt_.flat_likelihood, rng);
    if (hr.divergent) ++hmc_divergences_;
    if (s <= adapt_until_) adapt_.update(hr.accept_prob, opt_.hmc_target_accept);
    // canonical drive at sweep boundaries: a restored chain rebuilds the same
    // bytes, so resume is exact
    rebuild_activation();
  }
  {
    Rng rng = make_substream(opt_.seed, static_cast<uint64_t>(s), 0, 3);
    state_.rule = slice_sample_rule_params(state_, spikes_, grid_, priors_, k_begin_, k_end_, rng);
  }
  state_.iteration = s;
  state_.log_posterior = fit_log_likelihood() + log_prior(state_, spikes_, grid_, priors_,
                                                          k_begin_, k_end_);
}

double GibbsEngine::fit_log_likelihood() const {
  if (opt_.flat_likelihood) return 0.0;
  return span_log_likelihood(act_, state_.glm.link, spikes_, grid_, k_begin_, k_end_);
}

double GibbsEngine::recompute_log_posterior() const {
  double ll = 0.0;
  if (!opt_.flat_likelihood)
    ll = span_log_likelihood(activations(state_.glm, state_.net, feats_, grid_, k_begin_, k_end_),
                             state_.glm.link, spikes_, grid_, k_begin_, k_end_);
  return ll + log_prior(state_, spikes_, grid_, priors_, k_begin_, k_end_);
}

ChainRecord GibbsEngine::snapshot() const {
  ChainRecord r;
  r.iteration = state_.iteration;
  r.log_posterior = state_.log_posterior;
  r.adjacency = state_.net.adjacency;
  r.weights = state_.net.weights;
  r.rule = state_.rule;
  r.bias = state_.glm.bias;
  r.theta_raw = state_.glm.impulse.theta_raw;
  r.stim_coeffs = state_.glm.stim_coeffs;
  r.self_weight = state_.glm.self_weight;
  r.self_edge = state_.glm.self_edge;
  r.link = state_.glm.link;
  r.hmc = adapt_;
  r.hmc_divergences = hmc_divergences_;
  return r;
}

void GibbsEngine::restore(const ChainRecord& r) {
  const int N = spikes_.n_neurons;
  const int B = basis_.n_impulse_basis;
  if (r.adjacency.rows() != N || r.adjacency.cols() != N || r.weights.rows() != N * N ||
      r.weights.cols() != k_end_ || r.bias.size() != N || r.theta_raw.rows() != B ||
      r.theta_raw.cols() != N * N || r.self_weight.size() != N || r.self_edge.size() != N)
    throw param_error("GibbsEngine::restore: record shape does not match the engine");
  if (r.link != opt_.link || r.rule.kind != opt_.rule)
    throw param_error("GibbsEngine::restore: link or rule kind mismatch");
  state_.net.adjacency = r.adjacency;
  state_.net.weights = r.weights;
  state_.net.sparsity = priors_.sparsity;
  state_.rule = r.rule;
  state_.glm.bias = r.bias;
  state_.glm.impulse.theta_raw = r.theta_raw;
  state_.glm.impulse.alpha = priors_.dirichlet_alpha;
  state_.glm.stim_coeffs = r.stim_coeffs;
  state_.glm.self_weight = r.self_weight;
  state_.glm.self_edge = r.self_edge;
  state_.glm.link = r.link;
  state_.iteration = r.iteration;
  state_.log_posterior = r.log_posterior;
  adapt_ = r.hmc;
  hmc_divergences_ = r.hmc_divergences;
  rebuild_activation();
}

}  // namespace plasticnet
