#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <utility>

#include "plasticnet/common.hpp"

namespace plasticnet {

inline constexpr double kLog2Pi = 1.8378770664093454836;

// log(exp(a) + exp(b)) without overflow
double log_add_exp(double a, double b);

// log sum_i exp(v_i); returns -inf for empty or all -inf input
double log_sum_exp(const Arr& v);

// log(1 - exp(x)) for x < 0
double log1m_exp(double x);

double normal_log_pdf(double x, double mean, double sd);

// standard normal cdf / log-cdf, accurate in the far lower tail
double norm_cdf(double x);
double norm_log_cdf(double x);

// log(Phi(b) - Phi(a)), a < b, stable when both endpoints sit in one tail
double norm_log_interval(double a, double b);

// standard normal quantile (Wichura's PPND16, |err| ~ 1e-15)
double norm_quantile(double p);

// log P(X = k) for X ~ Poisson(mu); mu >= 0
double poisson_log_pmf(long long k, double mu);

// Gamma(shape, rate) log-density
double gamma_log_pdf(double x, double shape, double rate);

// Gauss-Hermite rule: integral exp(-x^2) f(x) dx ~= sum_i w_i f(x_i),
// computed from the Jacobi matrix eigendecomposition.
struct GaussHermite {
  Vec nodes;
  Vec weights;
};
GaussHermite gauss_hermite(int n);

// One univariate slice-sampling update (Neal 2003, stepping-out + shrinkage)
// targeting the density exp(log_f) restricted to [lo, hi].
struct SliceOptions {
  double width = 1.0;
  int max_steps = 64;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};
double slice_sample(const std::function<double(double)>& log_f, double x0,
                    const SliceOptions& opt, std::mt19937_64& rng);

}  // namespace plasticnet
