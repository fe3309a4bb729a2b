#include "plasticnet/model.hpp"

#include <cmath>

namespace plasticnet {

namespace {
double softplus(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}
}  // namespace

double apply_link(LinkKind link, double a) {
  double v = link == LinkKind::exp_link ? std::exp(a) : softplus(a);
  return std::max(v, kRateFloorHz);
}

double link_inverse(LinkKind link, double rate) {
  if (!(rate > 0.0)) throw param_error("link_inverse: rate must be positive");
  if (link == LinkKind::exp_link) return std::log(rate);
  return rate > 35.0 ? rate : std::log(std::expm1(rate));
}

double link_deriv(LinkKind link, double a) {
  if (link == LinkKind::exp_link) return std::exp(a);
  return 1.0 / (1.0 + std::exp(-a));
}

Arr apply_link_clamped(LinkKind link, const Arr& a) {
  if (link == LinkKind::exp_link) {
    static const double log_ceiling = std::log(kRateCeilingHz);
    return a.min(log_ceiling).exp().max(kRateFloorHz);
  }
  // softplus(x) = max(x,0) + log1p(exp(-|x|)), stable at both ends
  return ((-a.abs()).exp().log1p() + a.max(0.0)).max(kRateFloorHz).min(kRateCeilingHz);
}

Mat ImpulseCoeffs::beta() const {
  Mat b = theta_raw;
  for (Eigen::Index p = 0; p < b.cols(); ++p) b.col(p) /= b.col(p).sum();
  return b;
}

Mat activations(const GlmParams& params, const NetworkState& net, const FilteredFeatures& feats,
                const TimeGrid& grid, int k_begin, int k_end) {
  const int N = params.n_neurons();
  const int B = params.impulse.n_basis();
  if (net.n_neurons() != N || feats.n_neurons != N || feats.n_basis != B)
    throw param_error("activations: inconsistent dimensions");
  if (k_begin < 0 || k_end > grid.n_coarse || k_end <= k_begin)
    throw param_error("activations: bad window range");
  if (net.n_steps() < k_end)
    throw param_error("activations: weight trajectories shorter than window range");

  const int t0 = grid.window_begin(k_begin);
  const int len = (k_end - k_begin) * grid.fine_per_coarse;

  Mat act(len, N);
  if (feats.stim.size() > 0 && params.stim_coeffs.size() > 0) {
    if (params.stim_coeffs.rows() != feats.stim.cols())
      throw param_error("activations: stimulus coefficient size mismatch");
    act.noalias() = feats.stim.middleRows(t0, len) * params.stim_coeffs;
  } else {
    act.setZero();
  }
  act.rowwise() += params.bias.transpose();

  Mat coupling(N * B, N);
  for (int k = k_begin; k < k_end; ++k) {
    coupling.setZero();
    for (int post = 0; post < N; ++post) {
      for (int pre = 0; pre < N; ++pre) {
        double w;
        if (pre == post) {
          if (!params.self_edge(post)) continue;
          w = params.self_weight(post);
        } else {
          if (!net.adjacency(pre, post)) continue;
          w = net.weights(pair_index(pre, post, N), k);
        }
        coupling.block(pre * B, post, B, 1) = w * params.impulse.beta_pair(pair_index(pre, post, N));
      }
    }
    const int off = (k - k_begin) * grid.fine_per_coarse;
    act.middleRows(off, grid.fine_per_coarse).noalias() +=
        feats.impulse.middleRows(t0 + off, grid.fine_per_coarse) * coupling;
  }
  return act;
}

RateResult conditional_rate(const GlmParams& params, const NetworkState& net,
                            const FilteredFeatures& feats, const TimeGrid& grid) {
  Mat act = activations(params, net, feats, grid, 0, grid.n_coarse);
  if (!act.allFinite()) throw numeric_error("conditional_rate: non-finite drive");
  double ceiling_drive =
      params.link == LinkKind::exp_link ? std::log(kRateCeilingHz) : kRateCeilingHz;
  RateResult out;
  out.saturated = (act.array() > ceiling_drive).any();
  out.rates.resize(act.rows(), act.cols());
  for (Eigen::Index n = 0; n < act.cols(); ++n)
    out.rates.col(n) = apply_link_clamped(params.link, act.col(n).array()).matrix();
  return out;
}

double log_likelihood(const Mat& rates, const SpikeData& spikes, const TimeGrid& grid,
                      int k_begin, int k_end) {
  if (k_end < 0) k_end = grid.n_coarse;
  if (rates.rows() != grid.n_fine || rates.cols() != spikes.n_neurons)
    throw param_error("log_likelihood: rate series does not match grid and neuron count");
  if (k_begin < 0 || k_end > grid.n_coarse || k_end <= k_begin)
    throw param_error("log_likelihood: bad window range");

  const int b0 = grid.window_begin(k_begin);
  const int b1 = grid.window_begin(k_end);
  const double dt = grid.fine_dt_s;

  Mat block = rates.middleRows(b0, b1 - b0);
  if ((block.array() <= 0.0).any() || !block.allFinite())
    throw numeric_error("log_likelihood: rates must be positive and finite");

  double ll = -dt * block.sum();
  for (int n = 0; n < spikes.n_neurons; ++n) {
    const auto& ev = spikes.events[n];
    size_t i = 0;
    while (i < ev.size()) {
      int tau = grid.bin_of_time(ev[i]);
      size_t j = i + 1;
      while (j < ev.size() && grid.bin_of_time(ev[j]) == tau) ++j;
      if (tau >= b0 && tau < b1) {
        auto c = static_cast<double>(j - i);
        ll += c * std::log(rates(tau, n) * dt) - std::lgamma(c + 1.0);
      }
      i = j;
    }
  }
  return ll;
}

double span_log_likelihood(const Mat& act, LinkKind link, const SpikeData& spikes,
                           const TimeGrid& grid, int k_begin, int k_end) {
  if (k_end < 0) k_end = grid.n_coarse;
  if (k_begin < 0 || k_end > grid.n_coarse || k_end <= k_begin)
    throw param_error("span_log_likelihood: bad window range");
  const int b0 = grid.window_begin(k_begin);
  const int b1 = grid.window_begin(k_end);
  if (act.rows() != b1 - b0 || act.cols() != spikes.n_neurons)
    throw param_error("span_log_likelihood: activation block does not match span");

  const double dt = grid.fine_dt_s;
  double ll = 0.0;
  for (int n = 0; n < spikes.n_neurons; ++n) {
    Arr lam = apply_link_clamped(link, act.col(n).array());
    ll -= dt * lam.sum();
    const auto& ev = spikes.events[n];
    size_t i = 0;
    while (i < ev.size()) {
      int tau = grid.bin_of_time(ev[i]);
      size_t j = i + 1;
      while (j < ev.size() && grid.bin_of_time(ev[j]) == tau) ++j;
      if (tau >= b0 && tau < b1) {
        auto c = static_cast<double>(j - i);
        ll += c * std::log(lam[tau - b0] * dt) - std::lgamma(c + 1.0);
      }
      i = j;
    }
  }
  return ll;
}

Arr pair_kernel_drive(int pre, int post, const GlmParams& params, const FilteredFeatures& feats,
                      const TimeGrid& grid, int k_begin, int k_end) {
  const int N = params.n_neurons();
  if (pre < 0 || pre >= N || post < 0 || post >= N)
    throw param_error("pair_kernel_drive: neuron index out of range");
  const int B = params.impulse.n_basis();
  const int t0 = grid.window_begin(k_begin);
  const int len = (k_end - k_begin) * grid.fine_per_coarse;
  Vec beta = params.impulse.beta_pair(pair_index(pre, post, N));
  return (feats.impulse.middleRows(t0, len).middleCols(pre * B, B) * beta).array();
}

double SynapseObs::log_lik(int k, double w) const {
  const Window& win = windows_.at(k);
  Arr lam = apply_link_clamped(link_, win.base + w * win.psi);
  double ll = win.const_term - dt_ * lam.sum();
  for (size_t i = 0; i < win.spike_pos.size(); ++i)
    ll += win.spike_count[static_cast<Eigen::Index>(i)] * std::log(lam[win.spike_pos[i]]);
  return ll;
}

void SynapseObs::log_lik_batch(int k, const Arr& w, Arr& out) const {
  out.resize(w.size());
  const Window& win = windows_.at(k);
  Arr lam(win.base.size());
  for (Eigen::Index p = 0; p < w.size(); ++p) {
    lam = apply_link_clamped(link_, win.base + w[p] * win.psi);
    double ll = win.const_term - dt_ * lam.sum();
    for (size_t i = 0; i < win.spike_pos.size(); ++i)
      ll += win.spike_count[static_cast<Eigen::Index>(i)] * std::log(lam[win.spike_pos[i]]);
    out[p] = ll;
  }
}

double SynapseObs::log_lik_zero() const {
  double total = 0.0;
  for (int k = 0; k < n_steps(); ++k) total += log_lik(k, 0.0);
  return total;
}

double SynapseObs::total_log_lik(double w) const {
  double total = 0.0;
  for (int k = 0; k < n_steps(); ++k) total += log_lik(k, w);
  return total;
}

SynapseObs make_synapse_obs(int pre, int post, const GlmParams& params, const NetworkState& net,
                            const FilteredFeatures& feats, const SpikeData& spikes,
                            const TimeGrid& grid, int k_begin, int k_end,
                            const Vec* base_activation) {
  const int N = params.n_neurons();
  if (pre < 0 || pre >= N || post < 0 || post >= N)
    throw param_error("make_synapse_obs: neuron index out of range");
  const int pair = pair_index(pre, post, N);
  const int t0 = grid.window_begin(k_begin);
  const int fpc = grid.fine_per_coarse;
  const int len = (k_end - k_begin) * fpc;

  SynapseObs obs;
  obs.link_ = params.link;
  obs.dt_ = grid.fine_dt_s;

  obs.psi_ = pair_kernel_drive(pre, post, params, feats, grid, k_begin, k_end);

  Vec base;
  if (base_activation != nullptr) {
    if (base_activation->size() != len)
      throw param_error("make_synapse_obs: base activation length mismatch");
    base = *base_activation;
  } else {
    base = activations(params, net, feats, grid, k_begin, k_end).col(post);
  }
  // strip this synapse's current contribution out of the drive
  if (pre == post) {
    if (params.self_edge(post))
      base.array() -= params.self_weight(post) * obs.psi_;
  } else if (net.adjacency(pre, post)) {
    for (int k = k_begin; k < k_end; ++k)
      base.segment((k - k_begin) * fpc, fpc).array() -=
          net.weights(pair, k) * obs.psi_.segment((k - k_begin) * fpc, fpc);
  }

  const double dt = grid.fine_dt_s;
  const double log_dt = std::log(dt);
  obs.windows_.resize(k_end - k_begin);
  for (int k = k_begin; k < k_end; ++k) {
    auto& win = obs.windows_[k - k_begin];
    const int off = (k - k_begin) * fpc;
    int n_active = 0;
    for (int r = 0; r < fpc; ++r)
      if (obs.psi_[off + r] != 0.0) ++n_active;
    win.base.resize(n_active);
    win.psi.resize(n_active);
    std::vector<double> cnts;
    double const_term = 0.0;
    int a = 0;
    for (int r = 0; r < fpc; ++r) {
      double psi = obs.psi_[off + r];
      double c = spikes.counts(t0 + off + r, post);
      if (psi != 0.0) {
        win.base[a] = base[off + r];
        win.psi[a] = psi;
        if (c > 0.0) {
          win.spike_pos.push_back(a);
          cnts.push_back(c);
          const_term += c * log_dt - std::lgamma(c + 1.0);
        }
        ++a;
      } else {
        double lam = std::min(apply_link(params.link, base[off + r]), kRateCeilingHz);
        const_term -= dt * lam;
        if (c > 0.0) const_term += c * (std::log(lam) + log_dt) - std::lgamma(c + 1.0);
      }
    }
    win.spike_count = Eigen::Map<Arr>(cnts.data(), static_cast<Eigen::Index>(cnts.size()));
    win.const_term = const_term;
  }
  return obs;
}

double window_log_likelihood(const SynapseObs& obs, int k, double candidate_weight) {
  return obs.log_lik(k, candidate_weight);
}

}  // namespace plasticnet
