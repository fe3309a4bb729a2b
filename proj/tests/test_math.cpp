#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "plasticnet/math.hpp"
#include "plasticnet/rng.hpp"

using namespace plasticnet;
using testutil::batch_se;
using testutil::integrate;
using testutil::mean_of;

TEST_CASE("log_add_exp and log_sum_exp agree with direct sums and survive extremes") {
  CHECK(log_add_exp(std::log(2.0), std::log(3.0)) == doctest::Approx(std::log(5.0)).epsilon(1e-14));
  CHECK(log_add_exp(-1000.0, -1001.0) == doctest::Approx(-1000.0 + std::log1p(std::exp(-1.0))).epsilon(1e-14));
  CHECK(log_add_exp(-std::numeric_limits<double>::infinity(), 0.5) == doctest::Approx(0.5));

  Arr v(4);
  v << -1.2, 0.3, -0.5, 2.2;
  double direct = std::log(v.exp().sum());
  CHECK(log_sum_exp(v) == doctest::Approx(direct).epsilon(1e-14));

  Arr huge(3);
  huge << 1e4, 1e4 - 2.0, 1e4 - 40.0;
  double shifted = 1e4 + std::log(1.0 + std::exp(-2.0) + std::exp(-40.0));
  CHECK(std::isfinite(log_sum_exp(huge)));
  CHECK(log_sum_exp(huge) == doctest::Approx(shifted).epsilon(1e-14));
}

TEST_CASE("log1m_exp") {
  // extended precision sidesteps the cancellation the library routine avoids
  for (double la : {-1e-12, -1e-6, -0.1, -1.0, -40.0}) {
    long double direct = std::log(-std::expm1(static_cast<long double>(la)));
    CHECK(log1m_exp(la) ==
          doctest::Approx(static_cast<double>(direct)).epsilon(1e-12));
  }
}

TEST_CASE("normal pdf/cdf against quadrature") {
  auto pdf = [](double x) { return std::exp(normal_log_pdf(x, 0.3, 1.7)); };
  // integrate the density up to a few points and compare with norm_cdf
  for (double x : {-2.0, 0.0, 0.3, 1.0, 3.5}) {
    double num = integrate(pdf, 0.3 - 14.0 * 1.7, x, 1e-13);
    CHECK(norm_cdf((x - 0.3) / 1.7) == doctest::Approx(num).epsilon(1e-9));
  }
  CHECK(std::exp(norm_log_cdf(-1.234)) == doctest::Approx(norm_cdf(-1.234)).epsilon(1e-12));
  // deep tail: log cdf stays finite and matches the Mills-ratio asymptote
  double lc = norm_log_cdf(-38.0);
  CHECK(std::isfinite(lc));
  double mills = normal_log_pdf(-38.0, 0.0, 1.0) - std::log(38.0);
  CHECK(lc == doctest::Approx(mills).epsilon(1e-3));
}

TEST_CASE("norm_log_interval is stable where naive subtraction dies") {
  double direct = std::log(norm_cdf(1.1) - norm_cdf(0.4));
  CHECK(norm_log_interval(0.4, 1.1) == doctest::Approx(direct).epsilon(1e-12));
  double far = norm_log_interval(20.0, 21.0);
  CHECK(std::isfinite(far));
  // dominated by the lower endpoint density
  CHECK(far == doctest::Approx(normal_log_pdf(20.0, 0.0, 1.0) - std::log(20.0)).epsilon(1e-2));
}

TEST_CASE("norm_quantile inverts norm_cdf") {
  for (double p : {1e-10, 1e-4, 0.025, 0.5, 0.8, 1.0 - 1e-6}) {
    double x = norm_quantile(p);
    CHECK(norm_cdf(x) == doctest::Approx(p).epsilon(1e-10));
  }
  CHECK(norm_quantile(0.5) == doctest::Approx(0.0));
}

TEST_CASE("poisson and gamma log densities") {
  for (int k : {0, 1, 2, 7, 40}) {
    double direct = k * std::log(3.7) - 3.7 - std::lgamma(k + 1.0);
    CHECK(poisson_log_pmf(k, 3.7) == doctest::Approx(direct).epsilon(1e-13));
  }
  CHECK(std::isfinite(poisson_log_pmf(0, 0.0)));
  CHECK(poisson_log_pmf(0, 0.0) == doctest::Approx(0.0));
  CHECK(poisson_log_pmf(2, 0.0) == -std::numeric_limits<double>::infinity());

  // gamma(shape, rate) integrates to one and has the right mean
  double shape = 2.5, rate = 4.0;
  auto g = [&](double x) { return std::exp(gamma_log_pdf(x, shape, rate)); };
  CHECK(integrate(g, 1e-12, 30.0, 1e-13) == doctest::Approx(1.0).epsilon(1e-9));
  auto gx = [&](double x) { return x * std::exp(gamma_log_pdf(x, shape, rate)); };
  CHECK(integrate(gx, 1e-12, 40.0, 1e-13) == doctest::Approx(shape / rate).epsilon(1e-8));
}

TEST_CASE("Gauss-Hermite nodes integrate polynomials exactly") {
  for (int q : {5, 10, 20}) {
    GaussHermite gh = gauss_hermite(q);
    REQUIRE(gh.nodes.size() == q);
    // moments of exp(-x^2): int x^{2m} exp(-x^2) dx = sqrt(pi) (2m-1)!! / 2^m
    double sqrt_pi = std::sqrt(M_PI);
    std::vector<double> expect = {sqrt_pi, sqrt_pi / 2.0, 3.0 * sqrt_pi / 4.0,
                                  15.0 * sqrt_pi / 8.0};
    for (int m = 0; m < 4; ++m) {
      double s = 0.0;
      for (int i = 0; i < q; ++i)
        s += gh.weights[i] * std::pow(gh.nodes[i], 2 * m);
      CHECK(s == doctest::Approx(expect[static_cast<size_t>(m)]).epsilon(1e-12));
      double odd = 0.0;
      for (int i = 0; i < q; ++i)
        odd += gh.weights[i] * std::pow(gh.nodes[i], 2 * m + 1);
      CHECK(odd == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("Gauss-Hermite matches adaptive quadrature on a non-polynomial integrand") {
  // the tanh factor has poles at 0.4 +/- i*pi/2, so convergence is geometric
  // but not instant: ~3e-8 at 20 nodes, ~3e-12 at 40
  auto f = [](double x) { return std::cos(1.3 * x) + 0.2 * std::tanh(x - 0.4); };
  double direct = integrate([&](double x) { return std::exp(-x * x) * f(x); },
                            -10.0, 10.0, 1e-13);
  auto apply = [&](int q) {
    GaussHermite gh = gauss_hermite(q);
    double s = 0.0;
    for (int i = 0; i < q; ++i) s += gh.weights[i] * f(gh.nodes[i]);
    return s;
  };
  CHECK(apply(20) == doctest::Approx(direct).epsilon(1e-6));
  CHECK(apply(40) == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("slice sampler reproduces simple targets") {
  Rng rng = make_substream(7777, 0, 0);
  SUBCASE("gaussian") {
    auto lf = [](double x) { return -0.5 * (x - 2.0) * (x - 2.0) / 0.25; };
    SliceOptions opt;
    opt.width = 0.8;
    double x = 2.0;
    std::vector<double> xs;
    for (int i = 0; i < 40000; ++i) {
      x = slice_sample(lf, x, opt, rng);
      xs.push_back(x);
    }
    double m = mean_of(xs), se = batch_se(xs);
    CHECK(std::abs(m - 2.0) < 3.0 * se + 1e-9);
    double s2 = 0.0;
    for (double v : xs) s2 += (v - m) * (v - m);
    s2 /= static_cast<double>(xs.size());
    CHECK(s2 == doctest::Approx(0.25).epsilon(0.05));
  }
  SUBCASE("bounded support") {
    // Beta(2, 3) restricted via lo/hi, mean 0.4
    auto lf = [](double x) { return std::log(x) + 2.0 * std::log1p(-x); };
    SliceOptions opt;
    opt.width = 0.3;
    opt.lo = 0.0;
    opt.hi = 1.0;
    double x = 0.5;
    std::vector<double> xs;
    for (int i = 0; i < 40000; ++i) {
      x = slice_sample(lf, x, opt, rng);
      CHECK(x > 0.0);
      CHECK(x < 1.0);
      xs.push_back(x);
    }
    CHECK(std::abs(mean_of(xs) - 0.4) < 3.0 * batch_se(xs) + 1e-9);
  }
}

TEST_CASE("substreams are deterministic and decorrelated") {
  Rng a = make_substream(42, 3, 9, 1);
  Rng b = make_substream(42, 3, 9, 1);
  CHECK(a() == b());
  CHECK(a() == b());

  // first draws across distinct (sweep, task, stage) keys should all differ
  std::vector<uint64_t> firsts;
  for (uint64_t sweep : {0u, 1u, 2u})
    for (uint64_t task : {0u, 5u})
      for (uint64_t stage : {0u, 1u}) {
        Rng r = make_substream(42, sweep, task, stage);
        firsts.push_back(r());
      }
  std::sort(firsts.begin(), firsts.end());
  CHECK(std::adjacent_find(firsts.begin(), firsts.end()) == firsts.end());

  CHECK(splitmix64(0) != splitmix64(1));
}

TEST_CASE("uniform draws live strictly inside (0,1)") {
  Rng rng = make_substream(1, 0, 0);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 200000; ++i) {
    double u = draw_uniform(rng);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
  CHECK(lo < 1e-4);   // should get close to the edges with 2e5 draws
  CHECK(hi > 1.0 - 1e-4);
}

TEST_CASE("distribution moments") {
  Rng rng = make_substream(2024, 0, 0);
  const int n = 200000;

  SUBCASE("gamma") {
    double shape = 3.0, rate = 2.0;
    std::vector<double> xs(n);
    for (auto& v : xs) v = draw_gamma(rng, shape, rate);
    double m = mean_of(xs);
    double se = std::sqrt(shape / (rate * rate) / n);
    CHECK(std::abs(m - shape / rate) < 4.0 * se);
  }
  SUBCASE("poisson") {
    double mu = 6.3;
    std::vector<double> xs(n);
    for (auto& v : xs) v = static_cast<double>(draw_poisson(rng, mu));
    CHECK(std::abs(mean_of(xs) - mu) < 4.0 * std::sqrt(mu / n));
  }
  SUBCASE("categorical follows the weights") {
    Arr w(4);
    w << 1.0, 3.0, 0.0, 6.0;
    std::vector<int> hits(4, 0);
    for (int i = 0; i < n; ++i) hits[static_cast<size_t>(draw_categorical(rng, w))]++;
    CHECK(hits[2] == 0);
    for (int j : {0, 1, 3}) {
      double p = w[j] / 10.0;
      double se = std::sqrt(p * (1 - p) / n);
      CHECK(std::abs(hits[static_cast<size_t>(j)] / double(n) - p) < 4.0 * se);
    }
  }
}

TEST_CASE("truncated normal: support and closed-form moments") {
  Rng rng = make_substream(5150, 0, 0);
  auto phi = [](double z) { return std::exp(normal_log_pdf(z, 0.0, 1.0)); };

  struct Case {
    double mean, sd, lo, hi;
  };
  for (const Case& c : {Case{0.5, 1.0, -0.2, 1.4},      // central window
                        Case{0.0, 2.0, 3.0, 1e308},     // right tail
                        Case{1.0, 0.5, -1e308, 0.8},    // left interval
                        Case{0.0, 1.0, 6.0, 6.5}}) {    // extreme sliver
    double al = (c.lo - c.mean) / c.sd, be = (c.hi - c.mean) / c.sd;
    double z = std::exp(norm_log_interval(al, be));
    double exact = c.mean + c.sd * (phi(al) - phi(be)) / z;
    const int n = 60000;
    std::vector<double> xs(n);
    for (auto& v : xs) {
      v = draw_truncated_normal(rng, c.mean, c.sd, c.lo, c.hi);
      REQUIRE(v >= c.lo);
      REQUIRE(v <= c.hi);
    }
    double m = mean_of(xs);
    double sd_emp = 0.0;
    for (double v : xs) sd_emp += (v - m) * (v - m);
    sd_emp = std::sqrt(sd_emp / n);
    CHECK(std::abs(m - exact) < 4.0 * sd_emp / std::sqrt(double(n)) + 1e-12);
  }
}

TEST_CASE("DistSpec sample/log_pdf/mean line up") {
  Rng rng = make_substream(31337, 0, 0);
  auto check_dist = [&](const DistSpec& d, double lo, double hi) {
    CHECK(integrate([&](double x) { return std::exp(d.log_pdf(x)); }, lo, hi,
                    1e-12) == doctest::Approx(1.0).epsilon(1e-8));
    const int n = 100000;
    std::vector<double> xs(n);
    for (auto& v : xs) v = d.sample(rng);
    double se = batch_se(xs, 100);
    CHECK(std::abs(mean_of(xs) - d.mean()) < 4.0 * se + 1e-12);
  };
  check_dist(DistSpec::Uniform(-1.0, 2.5), -1.0, 2.5);
  check_dist(DistSpec::Normal(0.7, 1.3), 0.7 - 12 * 1.3, 0.7 + 12 * 1.3);

  DistSpec c = DistSpec::Constant(4.2);
  CHECK(c.sample(rng) == 4.2);
  CHECK(c.mean() == 4.2);
  CHECK(c.log_pdf(4.2) == 0.0);
  CHECK(c.log_pdf(4.3) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("kLog2Pi") {
  CHECK(kLog2Pi == doctest::Approx(std::log(2.0 * M_PI)).epsilon(1e-15));
}
