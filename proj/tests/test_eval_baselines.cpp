#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "plasticnet/baselines.hpp"
#include "plasticnet/eval.hpp"
#include "plasticnet/model.hpp"
#include "plasticnet/netsim.hpp"
#include "plasticnet/samplers.hpp"

using namespace plasticnet;
using testutil::make_spikes;
using testutil::random_times;
using testutil::stdp_pair_sum;

TEST_CASE("burn-in range") {
  auto [a, b] = burn_in_range(10, 0.5);
  CHECK(a == 5);
  CHECK(b == 10);
  auto [c, d] = burn_in_range(7, 0.0);
  CHECK(c == 0);
  CHECK(d == 7);
  auto [e, f] = burn_in_range(1, 0.9);  // always keeps at least the last record
  CHECK(e == 0);
  CHECK(f == 1);
  CHECK_THROWS_AS(burn_in_range(10, 1.0), param_error);
  CHECK_THROWS_AS(burn_in_range(10, -0.1), param_error);
}

TEST_CASE("ROC: rank statistic, tie handling, trapezoid identity") {
  SUBCASE("hand-checked separable case") {
    Mat scores(3, 3);
    scores << 0.0, 0.9, 0.8, 0.1, 0.0, 0.7, 0.2, 0.3, 0.0;
    IMat truth(3, 3);
    truth << 1, 1, 1, 0, 1, 1, 0, 0, 1;  // positives: the three highest scores
    RocResult roc = edge_roc(scores, truth);
    CHECK(roc.auc == doctest::Approx(1.0));
    CHECK(roc.fpr[0] == 0.0);
    CHECK(roc.tpr[0] == 0.0);
    CHECK(roc.fpr[roc.fpr.size() - 1] == doctest::Approx(1.0));
    CHECK(roc.tpr[roc.tpr.size() - 1] == doctest::Approx(1.0));
    CHECK(std::isinf(roc.threshold[0]));
  }

  SUBCASE("random scores match the Mann-Whitney count") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
      const int N = 5;
      Mat scores = Mat::Zero(N, N);
      IMat truth = IMat::Zero(N, N);
      std::vector<double> pos, neg;
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
          if (i == j) continue;
          double s = std::round(u(rng) * 8.0) / 8.0;  // coarse values force ties
          scores(i, j) = s;
          truth(i, j) = u(rng) < 0.4 ? 1 : 0;
          (truth(i, j) ? pos : neg).push_back(s);
        }
      if (pos.empty() || neg.empty()) continue;
      double pairs = 0.0;
      for (double p : pos)
        for (double n : neg) pairs += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
      double mw = pairs / (double(pos.size()) * double(neg.size()));
      RocResult roc = edge_roc(scores, truth);
      CHECK(roc.auc == doctest::Approx(mw).epsilon(1e-12));

      // area under the curve by trapezoid equals the rank statistic
      double trap = 0.0;
      for (int i = 1; i < roc.fpr.size(); ++i)
        trap += 0.5 * (roc.tpr[i] + roc.tpr[i - 1]) * (roc.fpr[i] - roc.fpr[i - 1]);
      CHECK(trap == doctest::Approx(roc.auc).epsilon(1e-12));
      // monotone curve
      for (int i = 1; i < roc.fpr.size(); ++i) {
        CHECK(roc.fpr[i] >= roc.fpr[i - 1]);
        CHECK(roc.tpr[i] >= roc.tpr[i - 1]);
      }
    }
  }

  SUBCASE("degenerate truth is rejected") {
    Mat s = Mat::Zero(2, 2);
    IMat t = IMat::Zero(2, 2);
    CHECK_THROWS_AS(edge_roc(s, t), param_error);  // no positives
    t << 0, 1, 1, 0;
    CHECK_THROWS_AS(edge_roc(s, t), param_error);  // no negatives
  }
}

TEST_CASE("trajectory error is invariant to affine rescaling") {
  Mat truth(2, 6);
  truth << 0.1, 0.3, 0.2, 0.5, 0.4, 0.6, 1.0, 0.9, 0.8, 0.7, 0.6, 0.5;

  SUBCASE("exact and affine-transformed estimates score zero") {
    Vec r1 = trajectory_error(truth, truth);
    CHECK(r1.cwiseAbs().maxCoeff() < 1e-14);
    Mat scaled = 2.5 * truth.array() - 0.7;
    Vec r2 = trajectory_error(scaled, truth);
    CHECK(r2.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("flat estimates fall back to the truth's spread") {
    Mat flat = Mat::Constant(2, 6, 0.42);
    Vec r = trajectory_error(flat, truth);
    for (int e = 0; e < 2; ++e) {
      Vec y = truth.row(e).transpose();
      double sd = std::sqrt((y.array() - y.mean()).square().mean());
      CHECK(r[e] == doctest::Approx(sd).epsilon(1e-12));
    }
  }
  SUBCASE("shape mismatches throw") {
    CHECK_THROWS_AS(trajectory_error(truth, truth.leftCols(3)), param_error);
    CHECK_THROWS_AS(trajectory_error(Mat::Zero(2, 0), Mat::Zero(2, 0)), param_error);
  }
}

namespace {
ChainRecord tiny_record(int iter, int adj01, double w01) {
  ChainRecord rec;
  rec.iteration = iter;
  rec.adjacency = IMat::Identity(2, 2);
  rec.adjacency(0, 1) = adj01;
  rec.weights = Mat::Zero(4, 3);
  rec.weights.row(1).setConstant(w01);
  rec.bias = Vec::Constant(2, 3.0);
  rec.theta_raw = Mat::Constant(3, 4, 1.0);
  rec.self_weight = Vec::Constant(2, -0.5);
  rec.self_edge = IVec::Ones(2);
  rec.link = LinkKind::exp_link;
  rec.rule.kind = RuleKind::static_rule;
  rec.rule.noise_std = 0.0;
  return rec;
}
}  // namespace

TEST_CASE("posterior summaries average the kept records") {
  PosteriorChain chain;
  chain.push_back(tiny_record(0, 1, 1.0));
  chain.push_back(tiny_record(1, 0, 2.0));
  chain.push_back(tiny_record(2, 1, 3.0));
  chain.push_back(tiny_record(3, 1, 5.0));

  Mat prob = posterior_edge_probability(chain, 0.5);  // keeps records 2, 3
  CHECK(prob(0, 1) == doctest::Approx(1.0));
  CHECK(prob(1, 0) == doctest::Approx(0.0));
  CHECK(prob(0, 0) == doctest::Approx(1.0));

  Mat mw = posterior_mean_weights(chain, 0.5);
  CHECK(mw(1, 0) == doctest::Approx(4.0));  // mean of 3 and 5
  CHECK(mw(0, 0) == doctest::Approx(0.0));

  Mat prob_all = posterior_edge_probability(chain, 0.0);
  CHECK(prob_all(0, 1) == doctest::Approx(0.75));
}

TEST_CASE("held-out predictive likelihood: teacher-forced propagation oracle") {
  TimeGrid grid(4.0, 1e-3, 1.0);
  std::mt19937_64 rng(44);
  SpikeData spikes = make_spikes({random_times(rng, 0.0, 4.0, 70),
                                  random_times(rng, 0.0, 4.0, 60)},
                                 grid);
  BasisSet basis = build_cosine_basis(3, 0.05, grid);
  FilteredFeatures feats = precompute_features(spikes, nullptr, basis, grid);

  SUBCASE("static rule: last fitted weight carries forward") {
    ChainRecord rec = tiny_record(0, 1, 0.8);
    rec.weights = Mat::Zero(4, 2);  // fitted through window 1 only
    rec.weights.row(1).setConstant(0.8);
    PosteriorChain chain{rec};
    PredictiveLL out = predictive_ll(chain, 2.0, spikes, grid, basis, 0.0);
    CHECK(out.n == 1);

    GlmParams glm;
    glm.bias = rec.bias;
    glm.impulse.theta_raw = rec.theta_raw;
    glm.self_weight = rec.self_weight;
    glm.self_edge = rec.self_edge;
    glm.link = rec.link;
    NetworkState net;
    net.adjacency = rec.adjacency;
    net.weights = Mat::Zero(4, 4);
    net.weights.row(1).setConstant(0.8);  // constant continuation
    Mat act = activations(glm, net, feats, grid, 2, 4);
    double direct = span_log_likelihood(act, glm.link, spikes, grid, 2, 4);
    CHECK(out.mean == doctest::Approx(direct).epsilon(1e-12));
    CHECK(out.sd == 0.0);
  }

  SUBCASE("plastic rule: noiseless mean propagation from the boundary") {
    ChainRecord rec = tiny_record(0, 1, 0.0);
    rec.rule.kind = RuleKind::additive;
    rec.rule.a_plus = 0.02;
    rec.rule.tau_plus = 0.02;
    rec.rule.a_minus = 0.01;
    rec.rule.tau_minus = 0.03;
    rec.rule.noise_std = 0.05;
    rec.weights = Mat::Zero(4, 2);
    rec.weights(1, 0) = 0.4;
    rec.weights(1, 1) = 0.55;
    PosteriorChain chain{rec};
    PredictiveLL out = predictive_ll(chain, 2.0, spikes, grid, basis, 0.0);

    // independent propagation via the quadratic pair sums
    NetworkState net;
    net.adjacency = rec.adjacency;
    net.weights = Mat::Zero(4, 4);
    net.weights(1, 0) = 0.4;
    net.weights(1, 1) = 0.55;
    double w = 0.55;
    for (int k = 2; k < 4; ++k) {
      StdpUpdate raw = stdp_pair_sum(spikes.events[0], spikes.events[1], k - 1.0, double(k),
                                     rec.rule.tau_plus, rec.rule.tau_minus);
      StdpUpdate u{rec.rule.a_plus * raw.l_plus, rec.rule.a_minus * raw.l_minus};
      w = transition_mean(w, u, rec.rule);
      net.weights(1, k) = w;
    }
    GlmParams glm;
    glm.bias = rec.bias;
    glm.impulse.theta_raw = rec.theta_raw;
    glm.self_weight = rec.self_weight;
    glm.self_edge = rec.self_edge;
    glm.link = rec.link;
    Mat act = activations(glm, net, feats, grid, 2, 4);
    double direct = span_log_likelihood(act, glm.link, spikes, grid, 2, 4);
    CHECK(out.mean == doctest::Approx(direct).epsilon(1e-9));
  }

  SUBCASE("two records give a sample standard deviation") {
    PosteriorChain chain{tiny_record(0, 1, 0.2), tiny_record(1, 1, 1.2)};
    chain[0].weights = Mat::Zero(4, 2);
    chain[0].weights.row(1).setConstant(0.2);
    chain[1].weights = Mat::Zero(4, 2);
    chain[1].weights.row(1).setConstant(1.2);
    PredictiveLL out = predictive_ll(chain, 2.0, spikes, grid, basis, 0.0);
    CHECK(out.n == 2);
    CHECK(out.sd > 0.0);
  }

  SUBCASE("invalid split points are rejected") {
    PosteriorChain chain{tiny_record(0, 1, 0.2)};
    CHECK_THROWS_AS(predictive_ll(chain, 2.5, spikes, grid, basis, 0.0), param_error);
    CHECK_THROWS_AS(predictive_ll(chain, 4.0, spikes, grid, basis, 0.0), param_error);
    CHECK_THROWS_AS(predictive_ll(chain, 0.0, spikes, grid, basis, 0.0), param_error);
    CHECK_THROWS_AS(predictive_ll(PosteriorChain{}, 2.0, spikes, grid, basis, 0.0), param_error);
  }
}

TEST_CASE("cross-correlogram scores match a brute-force histogram") {
  TimeGrid grid(20.0, 1e-3, 1.0);
  std::mt19937_64 rng(55);
  SpikeData spikes = make_spikes({random_times(rng, 0.0, 20.0, 300),
                                  random_times(rng, 0.0, 20.0, 250),
                                  {}},
                                 grid);
  const double max_lag = 0.1, bin = 2e-3;
  Mat scores = xcorr_scores(spikes, max_lag, bin);

  const int n_sig = 50, n_tot = 150;
  for (int pre = 0; pre < 3; ++pre)
    for (int post = 0; post < 3; ++post) {
      if (pre == post) {
        CHECK(scores(pre, post) == 0.0);
        continue;
      }
      if (spikes.events[pre].empty() || spikes.events[post].empty()) {
        CHECK(scores(pre, post) == 0.0);
        continue;
      }
      std::vector<double> hist(n_tot, 0.0);
      for (double t : spikes.events[post])
        for (double s : spikes.events[pre]) {
          if (s >= t) continue;
          double lag = t - s;
          if (lag > n_tot * bin) continue;
          hist[std::min(int(lag / bin), n_tot - 1)] += 1.0;
        }
      double base = 0.0;
      for (int j = n_sig; j < n_tot; ++j) base += hist[j];
      base /= (n_tot - n_sig);
      double best = 0.0;
      for (int j = 0; j < n_sig; ++j) best = std::max(best, std::abs(hist[j] - base));
      CHECK(scores(pre, post) == doctest::Approx(best).epsilon(1e-12));
    }

  CHECK_THROWS_AS(xcorr_scores(spikes, 0.1, 0.3), param_error);
}

TEST_CASE("group soft-threshold") {
  Vec v(3);
  v << 3.0, 0.0, 4.0;  // norm 5
  Vec s = group_shrink(v, 2.0);
  CHECK(s[0] == doctest::Approx(3.0 * (1.0 - 2.0 / 5.0)));
  CHECK(s[2] == doctest::Approx(4.0 * (1.0 - 2.0 / 5.0)));
  Vec z = group_shrink(v, 6.0);  // threshold above the norm: exact zero
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);
  Vec zero = Vec::Zero(3);
  CHECK(group_shrink(zero, 1.0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("MAP smooth objective gradient matches finite differences") {
  TimeGrid grid(3.0, 1e-3, 1.0);
  std::mt19937_64 rng(66);
  SpikeData spikes = make_spikes({random_times(rng, 0.0, 3.0, 60),
                                  random_times(rng, 0.0, 3.0, 45)},
                                 grid);
  BasisSet basis = build_cosine_basis(3, 0.04, grid);
  FilteredFeatures feats = precompute_features(spikes, nullptr, basis, grid);

  Rng prng = make_substream(9, 0, 0);
  for (int rep = 0; rep < 5; ++rep) {
    Vec x(1 + 2 * 3);
    for (int i = 0; i < x.size(); ++i) x[i] = 0.3 * draw_normal(prng);
    x[0] += 3.0;  // bias near a sane rate
    Vec grad;
    double val = map_glasso_smooth(x, 1, spikes, feats, grid, 0, 3, &grad);
    CHECK(std::isfinite(val));
    Vec fd(x.size());
    for (int i = 0; i < x.size(); ++i) {
      // h balances truncation against roundoff for an objective this curved
      const double h = 1e-5 * std::max(1.0, std::abs(x[i]));
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      fd[i] = (map_glasso_smooth(xp, 1, spikes, feats, grid, 0, 3, nullptr) -
               map_glasso_smooth(xm, 1, spikes, feats, grid, 0, 3, nullptr)) /
              (2.0 * h);
    }
    double rel = (grad - fd).norm() / std::max(1e-12, grad.norm());
    CHECK(rel < 1e-5);
  }
}

TEST_CASE("group-lasso MAP: optimality conditions and structure recovery") {
  SimConfig cfg = make_paper_experiment("two_neuron_static");
  cfg.grid = TimeGrid(30.0, 1e-3, 1.0);
  cfg.seed = 10;
  Rng nrng = make_substream(cfg.seed, 0, 0);
  SampledNetwork net = sample_network(cfg, nrng);
  Rng srng = make_substream(cfg.seed, 0, 1);
  SimResult sim = simulate(cfg, net.net, net.glm, srng);

  BasisSet basis = build_cosine_basis(cfg.n_basis, cfg.lag_max_s, cfg.grid);
  FilteredFeatures feats = precompute_features(sim.spikes, nullptr, basis, cfg.grid);

  const double lambda = 5.0;
  MapFitOptions mopt;
  mopt.tol = 2e-5;  // run down to stationarity so the KKT residuals are sharp
  MapFit fit = fit_map_glasso(sim.spikes, feats, lambda, cfg.grid, mopt);
  CHECK(fit.converged);
  CHECK(fit.n_iters < 2000);
  CHECK(fit.lambda == lambda);

  // KKT residuals of the solution, neuron by neuron
  const int N = 2, B = cfg.n_basis;
  for (int post = 0; post < N; ++post) {
    Vec x(1 + N * B);
    x[0] = fit.bias[post];
    x.tail(N * B) = fit.coeffs.col(post);
    Vec grad;
    map_glasso_smooth(x, post, sim.spikes, feats, cfg.grid, 0, cfg.grid.n_coarse, &grad);
    CHECK(std::abs(grad[0]) < 1e-4);  // bias unpenalized
    for (int pre = 0; pre < N; ++pre) {
      Vec g = grad.segment(1 + pre * B, B);
      Vec c = fit.coeffs.col(post).segment(pre * B, B);
      if (c.norm() == 0.0)
        CHECK(g.norm() <= lambda * (1.0 + 1e-3) + 1e-4);
      else
        CHECK((g + lambda * c / c.norm()).norm() < 1e-3 * std::max(1.0, g.norm()));
    }
  }

  // edge scores follow the planted structure: 0 -> 1 exists, 1 -> 0 does not
  CHECK(fit.edge_scores(0, 0) == 0.0);
  CHECK(fit.edge_scores(0, 1) > fit.edge_scores(1, 0));

  // lambda selection returns a candidate and the basis-overload agrees
  double lam = select_map_lambda(sim.spikes, feats, cfg.grid, {1.0, 10.0});
  CHECK((lam == 1.0 || lam == 10.0));
  MapFit fit2 = fit_map_glasso(sim.spikes, basis, lambda, cfg.grid, mopt);
  CHECK(fit2.objective == doctest::Approx(fit.objective).epsilon(1e-12));
}
