#include "plasticnet/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace plasticnet {

void SimConfig::validate() const {
  if (n_neurons < 1) throw param_error("SimConfig: need at least one neuron");
  if (sparsity < 0.0 || sparsity > 1.0) throw param_error("SimConfig: sparsity outside [0,1]");
  if (!(bias_mean_hz > 0.0)) throw param_error("SimConfig: baseline rate must be positive");
  if (bias_std_hz < 0.0) throw param_error("SimConfig: baseline rate std must be nonnegative");
  rule.validate();
  if (fixed_adjacency) {
    if (fixed_adjacency->rows() != n_neurons || fixed_adjacency->cols() != n_neurons)
      throw param_error("SimConfig: fixed adjacency shape mismatch");
  }
}

SampledNetwork sample_network(const SimConfig& cfg, Rng& rng) {
  cfg.validate();
  const int N = cfg.n_neurons;
  const int B = cfg.n_basis;
  const int K = cfg.grid.n_coarse;

  SampledNetwork out;
  out.net.sparsity = cfg.sparsity;
  out.net.adjacency = IMat::Zero(N, N);
  if (cfg.fixed_adjacency) {
    out.net.adjacency = *cfg.fixed_adjacency;
  } else {
    for (int pre = 0; pre < N; ++pre)
      for (int post = 0; post < N; ++post)
        if (pre != post) out.net.adjacency(pre, post) = draw_uniform(rng) < cfg.sparsity ? 1 : 0;
    out.net.adjacency.diagonal().setOnes();
  }

  out.glm.link = cfg.link;
  out.glm.bias.resize(N);
  for (int n = 0; n < N; ++n) {
    double rate = std::max(draw_normal(rng, cfg.bias_mean_hz, cfg.bias_std_hz), 0.1);
    out.glm.bias(n) = link_inverse(cfg.link, rate);
  }

  out.glm.impulse.alpha = 1.0;
  out.glm.impulse.theta_raw.resize(B, N * N);
  for (int p = 0; p < N * N; ++p)
    for (int b = 0; b < B; ++b) out.glm.impulse.theta_raw(b, p) = draw_gamma(rng, 1.0, 1.0);

  out.glm.self_edge.resize(N);
  out.glm.self_weight.resize(N);
  for (int n = 0; n < N; ++n) {
    out.glm.self_edge(n) = out.net.adjacency(n, n);
    out.glm.self_weight(n) = cfg.self_weight.sample(rng);
  }

  out.net.weights.resize(N * N, K);
  for (int p = 0; p < N * N; ++p) {
    double w = cfg.init_weight.sample(rng);
    if (rule_is_bounded(cfg.rule.kind)) {
      int tries = 0;
      while (w < cfg.rule.w_min || w > cfg.rule.w_max) {
        if (++tries > 1000)
          throw param_error("sample_network: init_weight has no mass inside the rule bounds");
        w = cfg.init_weight.sample(rng);
      }
    }
    out.net.weights.row(p).setConstant(w);
  }
  return out;
}

SimResult simulate(const SimConfig& cfg, const NetworkState& net, const GlmParams& params,
                   Rng& rng) {
  cfg.validate();
  const int N = cfg.n_neurons;
  const TimeGrid& grid = cfg.grid;
  const double dt = grid.fine_dt_s;
  const int K = grid.n_coarse;
  if (net.n_neurons() != N || params.n_neurons() != N)
    throw param_error("simulate: network size mismatch");

  BasisSet basis = build_cosine_basis(cfg.n_basis, cfg.lag_max_s, grid);
  const int L = basis.n_lags();

  // per-pair kernels on the lag grid (weights applied at read time)
  Mat kernels(N * N, L);
  for (int p = 0; p < N * N; ++p)
    kernels.row(p) = (basis.impulse * params.impulse.beta_pair(p)).transpose();

  // circular buffer of future kernel drive, slot t % (L+1) holds bin t
  Mat buf = Mat::Zero(N * N, L + 1);

  SimResult out;
  // replicate the initial column so diagonal and absent-edge rows stay at
  // their initial value instead of holding uninitialized memory
  out.weights = net.weights.col(0).replicate(1, K);

  std::vector<std::vector<double>> events(N);
  std::vector<StdpTraces> traces(N * N);

  Vec drive(N);
  int k = 0;
  for (int t = 0; t < grid.n_fine; ++t) {
    const int slot = t % (L + 1);
    for (int post = 0; post < N; ++post) {
      double a = params.bias(post);
      for (int pre = 0; pre < N; ++pre) {
        const int p = pair_index(pre, post, N);
        double gate_w;
        if (pre == post)
          gate_w = params.self_edge(post) ? params.self_weight(post) : 0.0;
        else
          gate_w = net.adjacency(pre, post) ? out.weights(p, k) : 0.0;
        if (gate_w != 0.0) a += gate_w * buf(p, slot);
      }
      drive(post) = apply_link(params.link, a);
      if (drive(post) > kRateCeilingHz) {
        std::ostringstream msg;
        msg << "simulate: rate " << drive(post) << " Hz above ceiling for neuron " << post
            << " at t=" << t * dt << " s (runaway network)";
        throw numeric_error(msg.str());
      }
    }
    buf.col(slot).setZero();

    for (int n = 0; n < N; ++n) {
      long long c = draw_poisson(rng, drive(n) * dt);
      if (c == 0) continue;
      std::vector<double> times(static_cast<size_t>(c));
      for (auto& v : times) v = (t + draw_uniform(rng)) * dt;
      std::sort(times.begin(), times.end());
      events[n].insert(events[n].end(), times.begin(), times.end());
      // scatter kernel drive into the future for every outgoing pair
      for (int post = 0; post < N; ++post) {
        const int p = pair_index(n, post, N);
        const int span = std::min(L, grid.n_fine - t - 1);
        for (int j = 0; j < span; ++j)
          buf(p, (t + 1 + j) % (L + 1)) += static_cast<double>(c) * kernels(p, j);
      }
    }

    if ((t + 1) % grid.fine_per_coarse == 0 && k + 1 < K) {
      const double t0 = k * grid.coarse_dt_s;
      const double t1 = (k + 1) * grid.coarse_dt_s;
      for (int pre = 0; pre < N; ++pre)
        for (int post = 0; post < N; ++post) {
          if (pre == post) continue;
          const int p = pair_index(pre, post, N);
          if (!net.adjacency(pre, post)) {
            out.weights(p, k + 1) = out.weights(p, k);
            continue;
          }
          StdpUpdate upd = accumulate_stdp(events[pre], events[post], t0, t1, cfg.rule, traces[p]);
          out.weights(p, k + 1) =
              sample_transition(out.weights(p, k), upd, cfg.rule, grid.coarse_dt_s, rng);
        }
      ++k;
    }
  }

  out.spikes = SpikeData::from_events(std::move(events), grid);
  return out;
}

SimConfig make_paper_experiment(const std::string& name) {
  SimConfig cfg;
  cfg.grid = TimeGrid(60.0, 1e-3, 1.0);
  cfg.bias_mean_hz = 20.0;
  cfg.bias_std_hz = 5.0;
  cfg.n_basis = 6;
  cfg.lag_max_s = 0.1;
  cfg.link = LinkKind::softplus;

  if (name.rfind("two_neuron", 0) == 0) {
    cfg.n_neurons = 2;
    cfg.sparsity = 0.25;
    IMat adj(2, 2);
    adj << 1, 1,  // self 0 present, edge 0 -> 1 present
        0, 1;     // edge 1 -> 0 absent, self 1 present
    cfg.fixed_adjacency = adj;
  }

  if (name == "two_neuron_static") {
    cfg.rule.kind = RuleKind::static_rule;
    cfg.rule.noise_std = 0.0;
    cfg.init_weight = DistSpec::Constant(1.0);
  } else if (name == "two_neuron_additive") {
    cfg.rule.kind = RuleKind::additive;
    cfg.rule.a_plus = 0.01;
    cfg.rule.tau_plus = 0.02;
    cfg.rule.a_minus = 0.005;
    cfg.rule.tau_minus = 0.02;
    cfg.rule.noise_std = 0.01;
    cfg.init_weight = DistSpec::Constant(0.5);
  } else if (name == "two_neuron_multiplicative") {
    cfg.rule.kind = RuleKind::multiplicative;
    cfg.rule.a_plus = 0.02;
    cfg.rule.tau_plus = 0.02;
    cfg.rule.a_minus = 0.01;
    cfg.rule.tau_minus = 0.02;
    cfg.rule.w_max = 1.5;
    cfg.rule.w_min = -0.5;
    cfg.rule.noise_std = 0.02;
    cfg.init_weight = DistSpec::Constant(0.25);
  } else if (name == "ten_neuron_additive") {
    // kernel mass is one and the softplus slope saturates at one, so a cycle's
    // gain is about the product of its weights; the cap and the depressive
    // drift at baseline rates keep the recurrent net subcritical for 60 s
    cfg.n_neurons = 10;
    cfg.sparsity = 28.0 / 90.0;
    cfg.bias_mean_hz = 10.0;
    cfg.bias_std_hz = 2.0;
    cfg.rule.kind = RuleKind::additive_bounded;
    cfg.rule.a_plus = 0.006;
    cfg.rule.tau_plus = 0.02;
    cfg.rule.a_minus = 0.005;
    cfg.rule.tau_minus = 0.035;
    cfg.rule.w_max = 0.6;
    cfg.rule.w_min = -0.2;
    cfg.rule.noise_std = 0.02;
    cfg.init_weight = DistSpec::Uniform(0.1, 0.45);
  } else {
    throw param_error("make_paper_experiment: unknown experiment '" + name + "'");
  }
  return cfg;
}

}  // namespace plasticnet
