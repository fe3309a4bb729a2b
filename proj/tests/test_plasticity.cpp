#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "plasticnet/math.hpp"
#include "plasticnet/plasticity.hpp"
#include "plasticnet/rng.hpp"

using namespace plasticnet;
using testutil::integrate;
using testutil::mean_of;
using testutil::random_times;
using testutil::stdp_pair_sum;

namespace {
LearningRuleParams additive_rule() {
  LearningRuleParams p;
  p.kind = RuleKind::additive;
  p.a_plus = 0.013;
  p.tau_plus = 0.025;
  p.a_minus = 0.007;
  p.tau_minus = 0.04;
  p.noise_std = 0.05;
  return p;
}
}  // namespace

TEST_CASE("trace recursion matches the explicit pair sum") {
  std::mt19937_64 rng(12345);
  auto pre = random_times(rng, 0.0, 10.0, 140);
  auto post = random_times(rng, 0.0, 10.0, 170);
  // inject exact ties within and across trains
  pre.push_back(4.0);
  pre.push_back(4.0);
  post.push_back(4.0);
  post.push_back(7.25);
  pre.push_back(7.25);
  std::sort(pre.begin(), pre.end());
  std::sort(post.begin(), post.end());

  LearningRuleParams p = additive_rule();
  StdpTraces tr;
  for (int k = 0; k < 10; ++k) {
    const double t0 = k * 1.0, t1 = (k + 1) * 1.0;
    StdpUpdate fast = accumulate_stdp(pre, post, t0, t1, p, tr);
    StdpUpdate brute = stdp_pair_sum(pre, post, t0, t1, p.tau_plus, p.tau_minus);
    CHECK(fast.l_plus ==
          doctest::Approx(p.a_plus * brute.l_plus).epsilon(1e-9));
    CHECK(fast.l_minus ==
          doctest::Approx(p.a_minus * brute.l_minus).epsilon(1e-9));
  }
}

TEST_CASE("one-shot accumulation equals carried traces") {
  std::mt19937_64 rng(99);
  auto pre = random_times(rng, 0.0, 6.0, 80);
  auto post = random_times(rng, 0.0, 6.0, 95);
  LearningRuleParams p = additive_rule();

  StdpTraces tr;
  accumulate_stdp(pre, post, 0.0, 3.0, p, tr);        // warm up over [0, 3)
  StdpUpdate carried = accumulate_stdp(pre, post, 3.0, 4.0, p, tr);
  StdpUpdate oneshot = accumulate_stdp(pre, post, 3.0, 4.0, p);
  CHECK(carried.l_plus == doctest::Approx(oneshot.l_plus).epsilon(1e-12));
  CHECK(carried.l_minus == doctest::Approx(oneshot.l_minus).epsilon(1e-12));
}

TEST_CASE("simultaneous spikes contribute nothing to each other") {
  std::vector<double> pre = {1.0};
  std::vector<double> post = {1.0};
  LearningRuleParams p = additive_rule();
  StdpUpdate u = accumulate_stdp(pre, post, 0.0, 2.0, p);
  CHECK(u.l_plus == 0.0);
  CHECK(u.l_minus == 0.0);
}

TEST_CASE("empty windows yield zero update") {
  std::vector<double> pre = {0.1, 0.2};
  std::vector<double> post = {0.15};
  LearningRuleParams p = additive_rule();
  StdpUpdate u = accumulate_stdp(pre, post, 5.0, 6.0, p);
  CHECK(u.l_plus == 0.0);
  CHECK(u.l_minus == 0.0);
}

TEST_CASE("transition means per rule") {
  StdpUpdate u{0.4, 0.1};

  LearningRuleParams stat;
  stat.kind = RuleKind::static_rule;
  stat.noise_std = 0.0;
  CHECK(transition_mean(0.7, u, stat) == 0.7);

  LearningRuleParams add = additive_rule();
  CHECK(transition_mean(0.7, u, add) == doctest::Approx(0.7 + 0.4 - 0.1));

  LearningRuleParams bnd = additive_rule();
  bnd.kind = RuleKind::additive_bounded;
  bnd.w_max = 0.9;
  bnd.w_min = -0.2;
  CHECK(transition_mean(0.7, u, bnd) == doctest::Approx(0.9));  // clamped high
  CHECK(transition_mean(-0.1, StdpUpdate{0.0, 0.5}, bnd) ==
        doctest::Approx(-0.2));  // clamped low
  CHECK(transition_mean(0.1, StdpUpdate{0.05, 0.02}, bnd) ==
        doctest::Approx(0.13));
  CHECK_THROWS_AS(transition_mean(1.5, u, bnd), numeric_error);

  LearningRuleParams mul = additive_rule();
  mul.kind = RuleKind::multiplicative;
  mul.w_max = 1.0;
  mul.w_min = -0.5;
  CHECK(transition_mean(0.2, u, mul) ==
        doctest::Approx(0.2 + 0.4 * (1.0 - 0.2) - 0.1 * (0.2 + 0.5)));
  // drives saturate at one so the mean stays inside the box
  CHECK(transition_mean(0.2, StdpUpdate{5.0, 0.0}, mul) == doctest::Approx(1.0));
  CHECK(transition_mean(0.2, StdpUpdate{0.0, 9.0}, mul) == doctest::Approx(-0.5));
}

TEST_CASE("sampled transitions: moments, bounds, densities") {
  Rng rng = make_substream(777, 1, 2);
  StdpUpdate u{0.12, 0.30};
  const double dt = 2.0;

  SUBCASE("additive gaussian") {
    LearningRuleParams p = additive_rule();
    const double m = transition_mean(0.5, u, p);
    const double sd = p.noise_std * std::sqrt(dt);
    const int n = 60000;
    std::vector<double> xs(n);
    for (auto& v : xs) v = sample_transition(0.5, u, p, dt, rng);
    CHECK(std::abs(mean_of(xs) - m) < 4.0 * sd / std::sqrt(double(n)));
    // density: gaussian with the scaled sd, integrates to one
    CHECK(transition_log_density(m + 0.3, 0.5, u, p, dt) ==
          doctest::Approx(normal_log_pdf(m + 0.3, m, sd)).epsilon(1e-12));
    CHECK(integrate([&](double w) { return std::exp(transition_log_density(w, 0.5, u, p, dt)); },
                    m - 10 * sd, m + 10 * sd, 1e-12) == doctest::Approx(1.0).epsilon(1e-8));
  }

  SUBCASE("bounded rules truncate") {
    LearningRuleParams p = additive_rule();
    p.kind = RuleKind::additive_bounded;
    p.w_max = 0.6;
    p.w_min = -0.1;
    p.noise_std = 0.4;  // wide so truncation bites
    const double m = transition_mean(0.5, u, p);
    const double sd = p.noise_std * std::sqrt(dt);
    const int n = 60000;
    std::vector<double> xs(n);
    for (auto& v : xs) {
      v = sample_transition(0.5, u, p, dt, rng);
      REQUIRE(v >= p.w_min);
      REQUIRE(v <= p.w_max);
    }
    double al = (p.w_min - m) / sd, be = (p.w_max - m) / sd;
    auto phi = [](double z) { return std::exp(normal_log_pdf(z, 0.0, 1.0)); };
    double exact = m + sd * (phi(al) - phi(be)) / std::exp(norm_log_interval(al, be));
    CHECK(std::abs(mean_of(xs) - exact) < 4.0 * sd / std::sqrt(double(n)));
    CHECK(integrate([&](double w) { return std::exp(transition_log_density(w, 0.5, u, p, dt)); },
                    p.w_min, p.w_max, 1e-12) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(transition_log_density(0.7, 0.5, u, p, dt) ==
          -std::numeric_limits<double>::infinity());
  }

  SUBCASE("static with zero noise is a point mass") {
    LearningRuleParams p;
    p.kind = RuleKind::static_rule;
    p.noise_std = 0.0;
    CHECK(sample_transition(0.31, u, p, dt, rng) == 0.31);
    CHECK(transition_log_density(0.31, 0.31, u, p, dt) == 0.0);
    CHECK(transition_log_density(0.3100001, 0.31, u, p, dt) ==
          -std::numeric_limits<double>::infinity());
  }
}

TEST_CASE("parameter validation rejects degenerate rules") {
  LearningRuleParams p = additive_rule();
  p.noise_std = 0.0;
  CHECK_THROWS_AS(p.validate(), param_error);  // diffusion-free STDP is unidentifiable

  LearningRuleParams b = additive_rule();
  b.kind = RuleKind::additive_bounded;
  b.w_min = 0.1;  // bounds must straddle zero
  CHECK_THROWS_AS(b.validate(), param_error);

  LearningRuleParams s;
  s.kind = RuleKind::static_rule;
  s.noise_std = -0.2;
  CHECK_THROWS_AS(s.validate(), param_error);
  s.noise_std = 0.0;
  CHECK_NOTHROW(s.validate());
}
