#include "plasticnet/rng.hpp"

#include <cmath>

#include "plasticnet/math.hpp"

namespace plasticnet {

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng make_substream(uint64_t master, uint64_t sweep, uint64_t task, uint64_t stage) {
  uint64_t s = splitmix64(master ^ 0xA0761D6478BD642FULL);
  s = splitmix64(s ^ (sweep + 0xE7037ED1A0B428DBULL));
  s = splitmix64(s ^ (task + 0x8EBC6AF09C88C6E3ULL));
  s = splitmix64(s ^ (stage + 0x589965CC75374CC3ULL));
  return Rng(s);
}

double draw_uniform(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double draw_uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * draw_uniform(rng);
}

double draw_normal(Rng& rng) { return norm_quantile(draw_uniform(rng)); }

double draw_normal(Rng& rng, double mean, double sd) {
  return mean + sd * draw_normal(rng);
}

double draw_exponential(Rng& rng) { return -std::log(draw_uniform(rng)); }

// Marsaglia & Tsang, with the usual shape<1 boost
double draw_gamma(Rng& rng, double shape, double rate) {
  if (shape <= 0.0 || rate <= 0.0) throw param_error("draw_gamma: shape and rate must be positive");
  if (shape < 1.0) {
    double u = draw_uniform(rng);
    return draw_gamma(rng, shape + 1.0, rate) * std::pow(u, 1.0 / shape);
  }
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = draw_normal(rng);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = draw_uniform(rng);
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v / rate;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

long long draw_poisson(Rng& rng, double mu) {
  if (mu < 0.0) throw numeric_error("draw_poisson: negative mean");
  if (mu == 0.0) return 0;
  // chunk so exp(-mu) cannot underflow; Poisson(a+b) = Poisson(a) + Poisson(b)
  long long total = 0;
  while (mu > 60.0) {
    double chunk = 60.0;
    double p = std::exp(-chunk), cdf = p, u = draw_uniform(rng);
    long long k = 0;
    while (u > cdf) {
      ++k;
      p *= chunk / static_cast<double>(k);
      cdf += p;
    }
    total += k;
    mu -= chunk;
  }
  double p = std::exp(-mu), cdf = p, u = draw_uniform(rng);
  long long k = 0;
  while (u > cdf) {
    ++k;
    p *= mu / static_cast<double>(k);
    cdf += p;
  }
  return total + k;
}

int draw_categorical(Rng& rng, const Arr& weights) {
  double total = weights.sum();
  if (!(total > 0.0) || !std::isfinite(total))
    throw numeric_error("draw_categorical: weights must sum to a positive finite value");
  double u = draw_uniform(rng) * total;
  double acc = 0.0;
  int last = static_cast<int>(weights.size()) - 1;
  for (int i = 0; i <= last; ++i) {
    acc += weights[i];
    if (u <= acc) return i;
  }
  return last;
}

namespace {

// Robert (1995): one-sided rejection for the standard normal restricted to
// [lo, inf) with lo > 0, using a shifted exponential proposal.
double robert_tail(Rng& rng, double lo, double hi) {
  double alpha = 0.5 * (lo + std::sqrt(lo * lo + 4.0));
  for (;;) {
    double z = lo + draw_exponential(rng) / alpha;
    if (z > hi) continue;
    double d = z - alpha;
    if (std::log(draw_uniform(rng)) <= -0.5 * d * d) return z;
  }
}

}  // namespace

double draw_truncated_normal(Rng& rng, double mean, double sd, double lo, double hi) {
  if (sd <= 0.0) throw param_error("draw_truncated_normal: sd must be positive");
  if (!(lo < hi)) throw param_error("draw_truncated_normal: requires lo < hi");
  double a = (lo - mean) / sd;
  double b = (hi - mean) / sd;
  constexpr double kTail = 4.0;
  if (a >= kTail) return mean + sd * robert_tail(rng, a, b);
  if (b <= -kTail) return mean - sd * robert_tail(rng, -b, -a);
  double pa = std::isinf(a) ? 0.0 : norm_cdf(a);
  double pb = std::isinf(b) ? 1.0 : norm_cdf(b);
  double u = pa + (pb - pa) * draw_uniform(rng);
  double z = norm_quantile(u);
  // clamp against quantile round-off at the interval edge
  return mean + sd * std::min(std::max(z, a), b);
}

double DistSpec::sample(Rng& rng) const {
  switch (kind) {
    case Kind::constant: return a;
    case Kind::uniform: return draw_uniform(rng, a, b);
    case Kind::normal: return draw_normal(rng, a, b);
  }
  throw param_error("DistSpec: unknown kind");
}

double DistSpec::log_pdf(double x) const {
  switch (kind) {
    case Kind::constant:
      return x == a ? 0.0 : -std::numeric_limits<double>::infinity();
    case Kind::uniform:
      return (x >= a && x <= b) ? -std::log(b - a) : -std::numeric_limits<double>::infinity();
    case Kind::normal:
      return normal_log_pdf(x, a, b);
  }
  throw param_error("DistSpec: unknown kind");
}

double DistSpec::mean() const {
  switch (kind) {
    case Kind::constant: return a;
    case Kind::uniform: return 0.5 * (a + b);
    case Kind::normal: return a;
  }
  throw param_error("DistSpec: unknown kind");
}

}  // namespace plasticnet
