#pragma once

// Shared test fixtures and reference implementations. Everything here is
// deliberately naive (quadratic loops, dense grids) so the fast library code
// has an independent answer to match.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "plasticnet/common.hpp"
#include "plasticnet/grid.hpp"
#include "plasticnet/obs.hpp"
#include "plasticnet/plasticity.hpp"
#include "plasticnet/spikes.hpp"

namespace testutil {

using plasticnet::Arr;
using plasticnet::Mat;
using plasticnet::Vec;

// ---------------------------------------------------------------------------
// Plasticity reference: explicit double sum over spike pairs. The potentiation
// side collects, for every postsynaptic spike q inside the window, the decayed
// influence of every presynaptic spike strictly before q; depression mirrors
// it with the roles swapped. Ties in time contribute nothing.
inline plasticnet::StdpUpdate stdp_pair_sum(const std::vector<double>& pre,
                                            const std::vector<double>& post,
                                            double t0, double t1,
                                            double tau_plus, double tau_minus) {
  plasticnet::StdpUpdate u{0.0, 0.0};
  for (double q : post) {
    if (q < t0 || q >= t1) continue;
    for (double s : pre)
      if (s < q) u.l_plus += std::exp(-(q - s) / tau_plus);
  }
  for (double s : pre) {
    if (s < t0 || s >= t1) continue;
    for (double q : post)
      if (q < s) u.l_minus += std::exp(-(s - q) / tau_minus);
  }
  return u;
}

// ---------------------------------------------------------------------------
// Feature reference: direct convolution. A spike landing in fine bin b feeds
// bins b+1 .. b+L with kernel samples taken at the snapped lag.
inline Vec brute_conv(const std::vector<double>& spike_times, const Vec& kernel,
                      const plasticnet::TimeGrid& grid) {
  Vec out = Vec::Zero(grid.n_fine);
  for (double s : spike_times) {
    const int b = grid.bin_of_time(s);
    for (int j = 0; j < kernel.size(); ++j) {
      const int t = b + 1 + j;
      if (t >= grid.n_fine) break;
      out[t] += kernel[j];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear-Gaussian state space: w_0 ~ N(m0, s0^2), w_k = w_{k-1} + d_{k-1} + eps,
// eps ~ N(0, q^2), y_k ~ N(w_k, r^2). Returns the exact log evidence
// log p(y_0..y_{K-1}) from the Kalman recursion.
inline double kalman_log_evidence(double m0, double s0,
                                  const std::vector<double>& drift, double q,
                                  const std::vector<double>& y, double r) {
  const int K = static_cast<int>(y.size());
  double mean = m0, var = s0 * s0, out = 0.0;
  for (int k = 0; k < K; ++k) {
    if (k > 0) {
      mean += drift[k - 1];
      var += q * q;
    }
    const double s = var + r * r;
    out += -0.5 * (std::log(2.0 * M_PI * s) + (y[k] - mean) * (y[k] - mean) / s);
    const double gain = var / s;
    mean += gain * (y[k] - mean);
    var *= (1.0 - gain);
  }
  return out;
}

// Gaussian pseudo-observation of the latent weight, one reading per window.
struct GaussianObs final : plasticnet::WindowObs {
  std::vector<double> y;
  double r = 1.0;
  GaussianObs(std::vector<double> y_, double r_) : y(std::move(y_)), r(r_) {}
  int n_steps() const override { return static_cast<int>(y.size()); }
  double log_lik(int k, double w) const override {
    const double z = (y[static_cast<size_t>(k)] - w) / r;
    return -0.5 * (std::log(2.0 * M_PI) + z * z) - std::log(r);
  }
};

// ---------------------------------------------------------------------------
// Dense-grid forward/backward for a scalar-state HMM. Discretizes the
// continuous state onto `grid` points with Riemann weights and runs exact
// discrete filtering, giving the evidence and smoothed per-step means that the
// Monte Carlo samplers must reproduce.
struct GridHmm {
  Vec grid;                         // state discretization, uniformly spaced
  double log_evidence = 0.0;
  Mat smoothed;                     // n_points x K posterior marginals (sum 1)

  GridHmm(const Vec& pts, const std::function<double(double)>& init_logpdf,
          const std::function<double(int, double, double)>& trans_logpdf,
          const std::function<double(int, double)>& obs_loglik, int n_steps) {
    grid = pts;
    const int n = static_cast<int>(pts.size());
    const double dw = pts[1] - pts[0];
    const double log_dw = std::log(dw);
    Mat alpha(n, n_steps);  // filtered, stored in probability space per step
    Vec cur(n);
    for (int i = 0; i < n; ++i)
      cur[i] = init_logpdf(pts[i]) + log_dw + obs_loglik(0, pts[i]);
    double step_log = normalize_log(cur);
    log_evidence = step_log;
    alpha.col(0) = cur;

    Mat trans_cache;  // trans_cache(i, j) = p(grid_j | grid_i) * dw, per step
    for (int k = 1; k < n_steps; ++k) {
      Vec next = Vec::Zero(n);
      trans_cache.resize(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          trans_cache(i, j) = std::exp(trans_logpdf(k, pts[j], pts[i])) * dw;
      Vec pred = trans_cache.transpose() * alpha.col(k - 1);
      for (int j = 0; j < n; ++j)
        next[j] = std::log(std::max(pred[j], 1e-300)) + obs_loglik(k, pts[j]);
      log_evidence += normalize_log(next);
      alpha.col(k) = next;

      // backward smoothing needs the transition again; rebuild on final pass
      if (k == n_steps - 1) {
        smoothed.resize(n, n_steps);
        smoothed.col(n_steps - 1) = alpha.col(n_steps - 1);
        Vec beta = alpha.col(n_steps - 1);
        for (int kk = n_steps - 1; kk >= 1; --kk) {
          trans_cache.resize(n, n);
          for (int i = 0; i < n; ++i)
            for (int jj = 0; jj < n; ++jj)
              trans_cache(i, jj) =
                  std::exp(trans_logpdf(kk, pts[jj], pts[i])) * dw;
          Vec pred = trans_cache.transpose() * alpha.col(kk - 1);
          Vec ratio(n);
          for (int jj = 0; jj < n; ++jj)
            ratio[jj] = beta[jj] / std::max(pred[jj], 1e-300);
          beta = alpha.col(kk - 1).cwiseProduct(trans_cache * ratio);
          beta /= beta.sum();
          smoothed.col(kk - 1) = beta;
        }
      }
    }
    if (n_steps == 1) {
      smoothed.resize(n, 1);
      smoothed.col(0) = alpha.col(0);
    }
  }

  double smoothed_mean(int k) const { return grid.dot(smoothed.col(k)); }
  double filtered_mean_last() const { return smoothed_mean(smoothed.cols() - 1); }

 private:
  // exponentiates in place with max subtraction, normalizes to sum 1, returns
  // the log normalizer
  static double normalize_log(Vec& v) {
    const double m = v.maxCoeff();
    v = (v.array() - m).exp();
    const double s = v.sum();
    v /= s;
    return m + std::log(s);
  }
};

// ---------------------------------------------------------------------------
// Batch-means standard error for a correlated scalar chain.
inline double batch_se(const std::vector<double>& x, int n_batches = 30) {
  const int n = static_cast<int>(x.size());
  const int bsz = n / n_batches;
  const int used = bsz * n_batches;
  std::vector<double> means(static_cast<size_t>(n_batches));
  for (int b = 0; b < n_batches; ++b) {
    double s = 0.0;
    for (int i = b * bsz; i < (b + 1) * bsz; ++i) s += x[static_cast<size_t>(i)];
    means[static_cast<size_t>(b)] = s / bsz;
  }
  const double grand =
      std::accumulate(means.begin(), means.end(), 0.0) / n_batches;
  double ss = 0.0;
  for (double m : means) ss += (m - grand) * (m - grand);
  const double var_of_mean = ss / (n_batches - 1) / n_batches;
  (void)used;
  return std::sqrt(var_of_mean);
}

inline double mean_of(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// ---------------------------------------------------------------------------
// Adaptive Simpson quadrature, for cross-checking fixed-rule integrals.
inline double simpson_rec(const std::function<double(double)>& f, double a,
                          double b, double fa, double fm, double fb,
                          double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

// Pre-split into fixed panels so a peak hiding between the three initial
// Simpson nodes cannot fool the error estimate into stopping early.
inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-12) {
  constexpr int kPanels = 16;
  const double h = (b - a) / kPanels;
  double total = 0.0;
  for (int p = 0; p < kPanels; ++p) {
    const double lo = a + p * h, hi = (p + 1 == kPanels) ? b : lo + h;
    const double fa = f(lo), fb = f(hi), fm = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    total += simpson_rec(f, lo, hi, fa, fm, fb, whole, tol / kPanels, 44);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Small deterministic spike sets.
inline plasticnet::SpikeData make_spikes(std::vector<std::vector<double>> per_neuron,
                                         const plasticnet::TimeGrid& grid) {
  for (auto& v : per_neuron) std::sort(v.begin(), v.end());
  return plasticnet::SpikeData::from_events(std::move(per_neuron), grid);
}

inline std::vector<double> random_times(std::mt19937_64& rng, double t0,
                                        double t1, int count) {
  std::uniform_real_distribution<double> u(t0, t1);
  std::vector<double> out(static_cast<size_t>(count));
  for (auto& t : out) t = u(rng);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace testutil
