#include "plasticnet/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "plasticnet/features.hpp"

namespace plasticnet {

namespace {
// spike (bin relative to span start, count) pairs for one neuron
std::vector<std::pair<int, double>> span_spike_bins(const SpikeData& spikes, const TimeGrid& grid,
                                                    int post, int b0, int b1) {
  std::vector<std::pair<int, double>> bins;
  const auto& ev = spikes.events[static_cast<size_t>(post)];
  size_t i = 0;
  while (i < ev.size()) {
    int tau = grid.bin_of_time(ev[i]);
    size_t j = i + 1;
    while (j < ev.size() && grid.bin_of_time(ev[j]) == tau) ++j;
    if (tau >= b0 && tau < b1) bins.emplace_back(tau - b0, static_cast<double>(j - i));
    i = j;
  }
  return bins;
}
}  // namespace

double map_glasso_smooth(const Vec& x, int post, const SpikeData& spikes,
                         const FilteredFeatures& feats, const TimeGrid& grid, int k_begin,
                         int k_end, Vec* grad) {
  if (k_end < 0) k_end = grid.n_coarse;
  if (k_begin < 0 || k_end > grid.n_coarse || k_end <= k_begin)
    throw param_error("map_glasso_smooth: bad window range");
  const int nb = static_cast<int>(feats.impulse.cols());
  if (x.size() != nb + 1) throw param_error("map_glasso_smooth: position size mismatch");
  const int b0 = grid.window_begin(k_begin);
  const int b1 = grid.window_begin(k_end);
  const int len = b1 - b0;
  const double dt = grid.fine_dt_s;
  const double log_dt = std::log(dt);

  auto fblock = feats.impulse.middleRows(b0, len);
  Arr a = (fblock * x.tail(nb)).array() + x[0];
  Arr lam_dt = dt * a.exp();  // expected counts per bin

  double nll = lam_dt.sum();
  Arr resid = lam_dt;  // d nll / d a
  for (const auto& [rb, c] : span_spike_bins(spikes, grid, post, b0, b1)) {
    nll -= c * (a[rb] + log_dt) - std::lgamma(c + 1.0);
    resid[rb] -= c;
  }
  if (grad) {
    grad->resize(nb + 1);
    (*grad)[0] = resid.sum();
    grad->tail(nb) = fblock.transpose() * resid.matrix();
  }
  return nll;
}

Vec group_shrink(const Vec& v, double threshold) {
  const double norm = v.norm();
  if (norm <= threshold || norm == 0.0) return Vec::Zero(v.size());
  return v * (1.0 - threshold / norm);
}

MapFit fit_map_glasso(const SpikeData& spikes, const FilteredFeatures& feats, double lambda,
                      const TimeGrid& grid, const MapFitOptions& opt) {
  if (lambda < 0.0 || !std::isfinite(lambda))
    throw param_error("fit_map_glasso: lambda must be nonnegative");
  const int N = spikes.n_neurons;
  const int B = feats.n_basis;
  const int nb = N * B;
  const int k_end = opt.k_end < 0 ? grid.n_coarse : opt.k_end;
  if (opt.k_begin < 0 || k_end > grid.n_coarse || k_end <= opt.k_begin)
    throw param_error("fit_map_glasso: bad window range");
  const double span_s = (k_end - opt.k_begin) * grid.coarse_dt_s;

  MapFit fit;
  fit.lambda = lambda;
  fit.bias = Vec::Zero(N);
  fit.coeffs = Mat::Zero(nb, N);
  fit.edge_scores = Mat::Zero(N, N);
  fit.converged = true;

  const double lo_t = opt.k_begin * grid.coarse_dt_s;
  const double hi_t = k_end * grid.coarse_dt_s;

  // Raw kernel columns carry unit mass, so their sum of squares dwarfs the
  // bias column of ones and the proximal steps crawl. Solve in coordinates
  // where each presynaptic group has unit RMS; that is the same problem with
  // a per-group weighted penalty, and the curvature ratio drops to O(1).
  const int b0f = grid.window_begin(opt.k_begin);
  const int lenf = grid.window_begin(k_end) - b0f;
  Vec gscale(N);
  for (int g = 0; g < N; ++g) {
    const double ms = feats.impulse.middleRows(b0f, lenf)
                          .middleCols(g * B, B)
                          .squaredNorm() /
                      static_cast<double>(lenf * B);
    gscale[g] = ms > 0.0 ? std::sqrt(ms) : 1.0;
  }
  FilteredFeatures sfeats = feats;
  for (int g = 0; g < N; ++g) sfeats.impulse.middleCols(g * B, B) /= gscale[g];

  for (int post = 0; post < N; ++post) {
    Vec x = Vec::Zero(nb + 1);
    const auto& ev = spikes.events[static_cast<size_t>(post)];
    const auto n_in = std::count_if(ev.begin(), ev.end(),
                                    [&](double t) { return t >= lo_t && t < hi_t; });
    x[0] = std::log(std::max(static_cast<double>(n_in) / span_s, 1e-3));

    auto penalty = [&](const Vec& u) {
      double p = 0.0;
      for (int g = 0; g < N; ++g) p += u.segment(g * B, B).norm() / gscale[g];
      return lambda * p;
    };

    // FISTA with backtracking and function-value restart
    Vec y = x;
    Vec g(nb + 1);
    double smooth_y = map_glasso_smooth(y, post, spikes, sfeats, grid, opt.k_begin, k_end, &g);
    double objective = smooth_y + penalty(x.tail(nb));
    double eta = opt.step0;
    double t_mom = 1.0;
    bool converged = false;
    int iter = 0;

    for (; iter < opt.max_iters; ++iter) {
      Vec cand(nb + 1);
      double smooth1 = 0.0;
      while (true) {
        cand[0] = y[0] - eta * g[0];
        for (int gidx = 0; gidx < N; ++gidx)
          cand.segment(1 + gidx * B, B) =
              group_shrink(y.segment(1 + gidx * B, B) - eta * g.segment(1 + gidx * B, B),
                           lambda * eta / gscale[gidx]);
        smooth1 = map_glasso_smooth(cand, post, spikes, sfeats, grid, opt.k_begin, k_end, nullptr);
        const Vec step = cand - y;
        const double quad = smooth_y + g.dot(step) + step.squaredNorm() / (2.0 * eta);
        if (smooth1 <= quad + 1e-12 * std::abs(quad)) break;
        eta *= 0.5;
        if (eta < 1e-18) throw numeric_error("fit_map_glasso: backtracking collapsed");
      }
      const double new_objective = smooth1 + penalty(cand.tail(nb));
      // distance to stationarity of cand is at most ~2x this under the
      // backtracking inequality
      const double gmap = (y - cand).norm() / eta;
      if (new_objective > objective) {
        t_mom = 1.0;  // momentum overshot: restart from the fresh point
        y = cand;
      } else {
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_mom * t_mom));
        y = cand + ((t_mom - 1.0) / t_next) * (cand - x);
        t_mom = t_next;
      }
      x = cand;
      objective = new_objective;
      if (gmap < opt.tol) {
        converged = true;
        ++iter;
        break;
      }
      smooth_y = map_glasso_smooth(y, post, spikes, sfeats, grid, opt.k_begin, k_end, &g);
      eta *= 1.1;
    }

    fit.bias[post] = x[0];
    for (int g2 = 0; g2 < N; ++g2)
      fit.coeffs.col(post).segment(g2 * B, B) = x.segment(1 + g2 * B, B) / gscale[g2];
    fit.objective += objective;
    fit.converged = fit.converged && converged;
    fit.n_iters = std::max(fit.n_iters, iter);
    for (int pre = 0; pre < N; ++pre) {
      if (pre == post) continue;
      fit.edge_scores(pre, post) = std::abs(fit.coeffs.col(post).segment(pre * B, B).sum());
    }
  }
  return fit;
}

MapFit fit_map_glasso(const SpikeData& spikes, const BasisSet& basis, double lambda,
                      const TimeGrid& grid, const MapFitOptions& opt) {
  FilteredFeatures feats = precompute_features(spikes, nullptr, basis, grid);
  return fit_map_glasso(spikes, feats, lambda, grid, opt);
}

double select_map_lambda(const SpikeData& spikes, const FilteredFeatures& feats,
                         const TimeGrid& grid, const std::vector<double>& candidates,
                         double holdout_frac, const MapFitOptions& opt) {
  if (candidates.empty()) throw param_error("select_map_lambda: no candidates");
  if (!(holdout_frac > 0.0 && holdout_frac < 1.0))
    throw param_error("select_map_lambda: holdout_frac must lie in (0, 1)");
  const int k0 = opt.k_begin;
  const int k1 = opt.k_end < 0 ? grid.n_coarse : opt.k_end;
  if (k1 - k0 < 2) throw param_error("select_map_lambda: span too short to split");
  int ks = k0 + static_cast<int>(std::floor((k1 - k0) * (1.0 - holdout_frac)));
  ks = std::clamp(ks, k0 + 1, k1 - 1);

  MapFitOptions train_opt = opt;
  train_opt.k_begin = k0;
  train_opt.k_end = ks;

  double best_lambda = candidates.front();
  double best_nll = std::numeric_limits<double>::infinity();
  const int nb = static_cast<int>(feats.impulse.cols());
  for (double lam : candidates) {
    MapFit fit = fit_map_glasso(spikes, feats, lam, grid, train_opt);
    double nll = 0.0;
    for (int post = 0; post < spikes.n_neurons; ++post) {
      Vec x(nb + 1);
      x[0] = fit.bias[post];
      x.tail(nb) = fit.coeffs.col(post);
      nll += map_glasso_smooth(x, post, spikes, feats, grid, ks, k1, nullptr);
    }
    if (nll < best_nll) {
      best_nll = nll;
      best_lambda = lam;
    }
  }
  return best_lambda;
}

Mat xcorr_scores(const SpikeData& spikes, double max_lag_s, double bin_s) {
  if (!(max_lag_s > 0.0) || !(bin_s > 0.0) || bin_s > max_lag_s)
    throw param_error("xcorr_scores: need 0 < bin_s <= max_lag_s");
  const int N = spikes.n_neurons;
  const int n_sig = std::max(1, static_cast<int>(std::llround(max_lag_s / bin_s)));
  const int n_tot = 3 * n_sig;
  const double horizon = n_tot * bin_s;

  Mat scores = Mat::Zero(N, N);
  std::vector<double> hist(static_cast<size_t>(n_tot));
  for (int pre = 0; pre < N; ++pre)
    for (int post = 0; post < N; ++post) {
      if (pre == post) continue;
      const auto& sp = spikes.events[static_cast<size_t>(pre)];
      const auto& tq = spikes.events[static_cast<size_t>(post)];
      if (sp.empty() || tq.empty()) continue;
      std::fill(hist.begin(), hist.end(), 0.0);
      size_t lo = 0;
      for (double t : tq) {
        while (lo < sp.size() && sp[lo] <= t - horizon) ++lo;
        for (size_t i = lo; i < sp.size() && sp[i] < t; ++i) {
          const int idx = std::min(static_cast<int>((t - sp[i]) / bin_s), n_tot - 1);
          hist[static_cast<size_t>(idx)] += 1.0;
        }
      }
      double baseline = 0.0;
      for (int j = n_sig; j < n_tot; ++j) baseline += hist[static_cast<size_t>(j)];
      baseline /= static_cast<double>(n_tot - n_sig);
      double best = 0.0;
      for (int j = 0; j < n_sig; ++j)
        best = std::max(best, std::abs(hist[static_cast<size_t>(j)] - baseline));
      scores(pre, post) = best;
    }
  return scores;
}

}  // namespace plasticnet
