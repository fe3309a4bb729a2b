#include "plasticnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "plasticnet/features.hpp"
#include "plasticnet/model.hpp"
#include "plasticnet/plasticity.hpp"

namespace plasticnet {

std::pair<size_t, size_t> burn_in_range(size_t n_records, double burn_in_frac) {
  if (!(burn_in_frac >= 0.0 && burn_in_frac < 1.0))
    throw param_error("burn-in fraction must lie in [0, 1)");
  auto start = static_cast<size_t>(std::floor(burn_in_frac * static_cast<double>(n_records)));
  if (start >= n_records && n_records > 0) start = n_records - 1;
  return {start, n_records};
}

PredictiveLL predictive_ll(const PosteriorChain& chain, double train_end_s,
                           const SpikeData& spikes, const TimeGrid& grid, const BasisSet& basis,
                           double burn_in_frac) {
  if (chain.empty()) throw param_error("predictive_ll: empty chain");
  const double ratio = train_end_s / grid.coarse_dt_s;
  const int k_train = static_cast<int>(std::llround(ratio));
  if (std::abs(ratio - k_train) > 1e-9 || k_train < 1 || k_train >= grid.n_coarse)
    throw param_error("predictive_ll: train_end_s must be a coarse boundary inside the grid");
  const int k_total = grid.n_coarse;
  const int N = spikes.n_neurons;

  FilteredFeatures feats = precompute_features(spikes, nullptr, basis, grid);
  auto [start, stop] = burn_in_range(chain.size(), burn_in_frac);

  std::vector<double> values;
  values.reserve(stop - start);
  for (size_t r = start; r < stop; ++r) {
    const ChainRecord& rec = chain[r];
    if (rec.adjacency.rows() != N || rec.weights.cols() < k_train)
      throw param_error("predictive_ll: record shape does not match data");

    GlmParams glm;
    glm.bias = rec.bias;
    glm.stim_coeffs = rec.stim_coeffs;
    glm.impulse.theta_raw = rec.theta_raw;
    glm.self_weight = rec.self_weight;
    glm.self_edge = rec.self_edge;
    glm.link = rec.link;

    NetworkState net;
    net.adjacency = rec.adjacency;
    net.weights = Mat::Zero(N * N, k_total);
    net.weights.leftCols(rec.weights.cols()) = rec.weights;

    // teacher-forced noiseless propagation across the held-out windows
    for (int pre = 0; pre < N; ++pre)
      for (int post = 0; post < N; ++post) {
        if (pre == post || !net.adjacency(pre, post)) continue;
        const int p = pair_index(pre, post, N);
        if (rule_is_stdp(rec.rule.kind)) {
          auto raw = raw_stdp_updates(spikes.events[static_cast<size_t>(pre)],
                                      spikes.events[static_cast<size_t>(post)], grid, k_train - 1,
                                      k_total, rec.rule.tau_plus, rec.rule.tau_minus);
          double w = net.weights(p, k_train - 1);
          for (int k = k_train; k < k_total; ++k) {
            StdpUpdate u{rec.rule.a_plus * raw[static_cast<size_t>(k - k_train)].l_plus,
                         rec.rule.a_minus * raw[static_cast<size_t>(k - k_train)].l_minus};
            w = transition_mean(w, u, rec.rule);
            net.weights(p, k) = w;
          }
        } else {
          net.weights.row(p).segment(k_train, k_total - k_train)
              .setConstant(net.weights(p, k_train - 1));
        }
      }

    Mat act = activations(glm, net, feats, grid, k_train, k_total);
    values.push_back(span_log_likelihood(act, glm.link, spikes, grid, k_train, k_total));
  }

  PredictiveLL out;
  out.n = static_cast<int>(values.size());
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

RocResult edge_roc(const Mat& scores, const IMat& truth_adjacency) {
  const auto N = scores.rows();
  if (scores.cols() != N || truth_adjacency.rows() != N || truth_adjacency.cols() != N)
    throw param_error("edge_roc: score and truth matrices must be square and matching");

  struct Entry {
    double score;
    int label;
  };
  std::vector<Entry> entries;
  long long n_pos = 0, n_neg = 0;
  for (Eigen::Index pre = 0; pre < N; ++pre)
    for (Eigen::Index post = 0; post < N; ++post) {
      if (pre == post) continue;
      const int label = truth_adjacency(pre, post) != 0 ? 1 : 0;
      entries.push_back({scores(pre, post), label});
      (label ? n_pos : n_neg) += 1;
    }
  if (n_pos == 0 || n_neg == 0)
    throw param_error("edge_roc: truth must contain both present and absent edges");

  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.score > b.score; });

  RocResult out;
  std::vector<double> ths{std::numeric_limits<double>::infinity()};
  std::vector<double> fprs{0.0}, tprs{0.0};
  long long tp = 0, fp = 0;
  // rank AUC accumulated tie-aware alongside the threshold sweep
  double auc_pairs = 0.0;
  size_t i = 0;
  while (i < entries.size()) {
    size_t j = i;
    long long tie_pos = 0, tie_neg = 0;
    while (j < entries.size() && entries[j].score == entries[i].score) {
      (entries[j].label ? tie_pos : tie_neg) += 1;
      ++j;
    }
    // positives in this tie group beat all later negatives and half the tied ones
    auc_pairs += static_cast<double>(tie_pos) *
                 (static_cast<double>(n_neg - fp) - 0.5 * static_cast<double>(tie_neg));
    tp += tie_pos;
    fp += tie_neg;
    ths.push_back(entries[i].score);
    fprs.push_back(static_cast<double>(fp) / static_cast<double>(n_neg));
    tprs.push_back(static_cast<double>(tp) / static_cast<double>(n_pos));
    i = j;
  }
  out.auc = auc_pairs / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  out.threshold = Eigen::Map<Vec>(ths.data(), static_cast<Eigen::Index>(ths.size()));
  out.fpr = Eigen::Map<Vec>(fprs.data(), static_cast<Eigen::Index>(fprs.size()));
  out.tpr = Eigen::Map<Vec>(tprs.data(), static_cast<Eigen::Index>(tprs.size()));
  return out;
}

Vec trajectory_error(const Mat& estimated, const Mat& truth) {
  if (estimated.rows() != truth.rows() || estimated.cols() != truth.cols())
    throw param_error("trajectory_error: shape mismatch");
  const auto K = estimated.cols();
  if (K == 0) throw param_error("trajectory_error: empty trajectories");
  Vec rmse(estimated.rows());
  for (Eigen::Index e = 0; e < estimated.rows(); ++e) {
    const Vec x = estimated.row(e).transpose();
    const Vec y = truth.row(e).transpose();
    const double mx = x.mean(), my = y.mean();
    const double vx = (x.array() - mx).square().sum();
    double a = 0.0;
    if (vx > 0.0) a = ((x.array() - mx) * (y.array() - my)).sum() / vx;
    const double b = my - a * mx;
    rmse[e] = std::sqrt((a * x.array() + b - y.array()).square().mean());
  }
  return rmse;
}

Mat posterior_edge_probability(const PosteriorChain& chain, double burn_in_frac) {
  if (chain.empty()) throw param_error("posterior_edge_probability: empty chain");
  auto [start, stop] = burn_in_range(chain.size(), burn_in_frac);
  Mat prob = Mat::Zero(chain[start].adjacency.rows(), chain[start].adjacency.cols());
  for (size_t r = start; r < stop; ++r) prob += chain[r].adjacency.cast<double>();
  return prob / static_cast<double>(stop - start);
}

Mat posterior_mean_weights(const PosteriorChain& chain, double burn_in_frac) {
  if (chain.empty()) throw param_error("posterior_mean_weights: empty chain");
  auto [start, stop] = burn_in_range(chain.size(), burn_in_frac);
  Mat mean = Mat::Zero(chain[start].weights.rows(), chain[start].weights.cols());
  for (size_t r = start; r < stop; ++r) mean += chain[r].weights;
  return mean / static_cast<double>(stop - start);
}

}  // namespace plasticnet
