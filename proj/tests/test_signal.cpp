#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "plasticnet/basis.hpp"
#include "plasticnet/features.hpp"
#include "plasticnet/grid.hpp"
#include "plasticnet/spikes.hpp"

using namespace plasticnet;
using testutil::brute_conv;
using testutil::make_spikes;
using testutil::random_times;

TEST_CASE("time grid arithmetic") {
  TimeGrid g(60.0, 1e-3, 1.0);
  CHECK(g.n_fine == 60000);
  CHECK(g.n_coarse == 60);
  CHECK(g.fine_per_coarse == 1000);
  CHECK(g.coarse_of(0) == 0);
  CHECK(g.coarse_of(999) == 0);
  CHECK(g.coarse_of(1000) == 1);
  CHECK(g.window_begin(3) == 3000);
  CHECK(g.window_end(3) == 4000);
  CHECK(g.bin_of_time(0.0) == 0);
  CHECK(g.bin_of_time(0.0009999) == 0);
  CHECK(g.bin_of_time(0.001) == 1);
  CHECK(g.bin_of_time(59.9999) == 59999);

  TimeGrid tiny(0.03, 0.001, 0.01);
  CHECK(tiny.n_fine == 30);
  CHECK(tiny.n_coarse == 3);
  CHECK(tiny.fine_per_coarse == 10);
}

TEST_CASE("grid rejects inconsistent spacings") {
  CHECK_THROWS_AS(TimeGrid(10.0, 1e-3, 0.0015), param_error);  // coarse not multiple of fine
  CHECK_THROWS_AS(TimeGrid(10.5, 1e-3, 1.0), param_error);     // duration not multiple of coarse
  CHECK_THROWS_AS(TimeGrid(-1.0, 1e-3, 1.0), param_error);
  CHECK_NOTHROW(TimeGrid(10.0, 2e-3, 0.5));
}

TEST_CASE("spike binning") {
  TimeGrid g(1.0, 1e-3, 0.1);
  auto sd = make_spikes({{0.0005, 0.0005, 0.0512, 0.9999}, {0.5}}, g);
  CHECK(sd.n_neurons == 2);
  CHECK(sd.counts.rows() == g.n_fine);
  CHECK(sd.counts(0, 0) == 2);
  CHECK(sd.counts(51, 0) == 1);
  CHECK(sd.counts(999, 0) == 1);
  CHECK(sd.counts(500, 1) == 1);
  CHECK(sd.counts.col(0).sum() == 4);
  CHECK(sd.total_count(0) == 4);
  CHECK(sd.total_count() == 5);
}

TEST_CASE("raised-cosine basis: shape, support, unit mass") {
  TimeGrid g(2.0, 1e-3, 0.1);
  for (int B : {3, 6, 8}) {
    BasisSet basis = build_cosine_basis(B, 0.1, g);
    CHECK(basis.n_impulse_basis == B);
    CHECK(basis.n_lags() == 100);
    CHECK(basis.impulse.rows() == 100);
    CHECK(basis.impulse.cols() == B);
    CHECK((basis.impulse.array() >= 0.0).all());
    // every kernel integrates to one on the lag grid
    for (int b = 0; b < B; ++b) {
      double mass = basis.impulse.col(b).sum() * g.fine_dt_s;
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
    }
    // centers are staggered: peak lag strictly increases with b
    int prev = -1;
    for (int b = 0; b < B; ++b) {
      int arg = 0;
      basis.impulse.col(b).maxCoeff(&arg);
      CHECK(arg > prev);
      prev = arg;
    }
  }
}

TEST_CASE("basis respects a different lag ceiling and bin width") {
  TimeGrid g(1.0, 2e-3, 0.1);
  BasisSet basis = build_cosine_basis(4, 0.05, g);
  CHECK(basis.n_lags() == 25);
  for (int b = 0; b < 4; ++b)
    CHECK(basis.impulse.col(b).sum() * g.fine_dt_s == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("filtered features equal the direct convolution") {
  TimeGrid g(2.0, 1e-3, 0.1);
  std::mt19937_64 rng(4242);
  std::vector<std::vector<double>> trains = {
      random_times(rng, 0.0, 2.0, 90), random_times(rng, 0.0, 2.0, 60)};
  // duplicate a spike and put one in the final bin to probe edge handling
  trains[0].push_back(trains[0][10]);
  trains[1].push_back(1.9995);
  SpikeData sd = make_spikes(trains, g);

  BasisSet basis = build_cosine_basis(5, 0.06, g);
  FilteredFeatures feats = precompute_features(sd, nullptr, basis, g);
  REQUIRE(feats.impulse.rows() == g.n_fine);
  REQUIRE(feats.impulse.cols() == 2 * 5);

  for (int pre = 0; pre < 2; ++pre)
    for (int b = 0; b < 5; ++b) {
      Vec direct = brute_conv(sd.events[pre], basis.impulse.col(b), g);
      double err = (feats.impulse.col(pre * 5 + b) - direct).cwiseAbs().maxCoeff();
      CHECK(err < 1e-12);
    }
}

TEST_CASE("stimulus features equal the direct convolution") {
  TimeGrid g(0.5, 1e-3, 0.1);
  std::mt19937_64 rng(7);
  Stimulus stim;
  stim.values.resize(g.n_fine, 2);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int t = 0; t < g.n_fine; ++t) {
    stim.values(t, 0) = nd(rng);
    stim.values(t, 1) = (t % 100 < 5) ? 1.0 : 0.0;  // sparse pulses
  }

  SpikeData sd = make_spikes({{0.1}, {0.3}}, g);
  BasisSet basis = build_cosine_basis(4, 0.04, g);
  FilteredFeatures feats = precompute_features(sd, &stim, basis, g);
  const int S = basis.n_stim_basis;
  REQUIRE(feats.stim.cols() == 2 * S);

  for (int d = 0; d < 2; ++d)
    for (int b = 0; b < S; ++b) {
      Vec direct = Vec::Zero(g.n_fine);
      for (int t = 0; t < g.n_fine; ++t) {
        if (stim.values(t, d) == 0.0) continue;
        for (int j = 0; j < basis.stim.rows(); ++j) {
          int tt = t + 1 + j;
          if (tt >= g.n_fine) break;
          direct[tt] += stim.values(t, d) * basis.stim(j, b);
        }
      }
      double err = (feats.stim.col(d * S + b) - direct).cwiseAbs().maxCoeff();
      CHECK(err < 1e-12);
    }
}

TEST_CASE("features reject mismatched grids and non-finite stimuli") {
  TimeGrid g(1.0, 1e-3, 0.1);
  TimeGrid g2(2.0, 1e-3, 0.1);
  SpikeData sd = make_spikes({{0.5}}, g);
  BasisSet basis = build_cosine_basis(3, 0.05, g);
  CHECK_THROWS_AS(precompute_features(sd, nullptr, basis, g2), param_error);

  Stimulus bad;
  bad.values = Mat::Zero(g.n_fine, 1);
  bad.values(10, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(precompute_features(sd, &bad, basis, g), param_error);
}
