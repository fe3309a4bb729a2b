#pragma once

#include <cstdint>
#include <random>

#include "plasticnet/common.hpp"

namespace plasticnet {

using Rng = std::mt19937_64;

uint64_t splitmix64(uint64_t x);

// Deterministic substream derivation: one master seed fans out into
// independent streams keyed by (sweep, task, stage). Used so that per-synapse
// sampling is reproducible regardless of thread count or execution order.
Rng make_substream(uint64_t master, uint64_t sweep, uint64_t task, uint64_t stage = 0);

// uniform double in (0,1), 53-bit resolution, never returns an endpoint
double draw_uniform(Rng& rng);
double draw_uniform(Rng& rng, double lo, double hi);
double draw_normal(Rng& rng);
double draw_normal(Rng& rng, double mean, double sd);
double draw_exponential(Rng& rng);  // rate 1
double draw_gamma(Rng& rng, double shape, double rate);
long long draw_poisson(Rng& rng, double mu);
// categorical draw from unnormalized nonnegative weights
int draw_categorical(Rng& rng, const Arr& weights);

// N(mean, sd^2) conditioned on [lo, hi]; either bound may be infinite.
// Inverse-CDF in the central region, exponential rejection in far tails.
double draw_truncated_normal(Rng& rng, double mean, double sd, double lo, double hi);

// Scalar distribution used for initial weights, biases, etc.
struct DistSpec {
  enum class Kind { constant, uniform, normal };
  Kind kind = Kind::constant;
  double a = 0.0;  // value | lower | mean
  double b = 0.0;  // unused | upper | sd

  static DistSpec Constant(double v) { return {Kind::constant, v, 0.0}; }
  static DistSpec Uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static DistSpec Normal(double mean, double sd) { return {Kind::normal, mean, sd}; }

  double sample(Rng& rng) const;
  double log_pdf(double x) const;
  double mean() const;
};

}  // namespace plasticnet
