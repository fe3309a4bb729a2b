#include "plasticnet/math.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>

namespace plasticnet {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kSqrtPi = 1.7724538509055160273;
}  // namespace

double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double log_sum_exp(const Arr& v) {
  if (v.size() == 0) return -kInf;
  double m = v.maxCoeff();
  if (m == -kInf) return -kInf;
  return m + std::log((v - m).exp().sum());
}

double log1m_exp(double x) {
  if (x >= 0.0) throw numeric_error("log1m_exp: argument must be negative");
  // Maechler's cutoff
  if (x > -0.6931471805599453) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

double normal_log_pdf(double x, double mean, double sd) {
  double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * kLog2Pi;
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double norm_log_cdf(double x) {
  if (x > -30.0) return std::log(norm_cdf(x));
  // asymptotic lower tail: Phi(x) ~ phi(x)/(-x) * (1 - 1/x^2 + 3/x^4)
  double x2 = x * x;
  return -0.5 * x2 - 0.5 * kLog2Pi - std::log(-x) + std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

double norm_log_interval(double a, double b) {
  if (!(a < b)) throw numeric_error("norm_log_interval: requires a < b");
  if (a >= 0.0) return norm_log_interval(-b, -a);
  if (b <= 0.0) {
    double lb = norm_log_cdf(b), la = norm_log_cdf(a);
    if (la == -kInf) return lb;
    return lb + log1m_exp(la - lb);
  }
  // endpoints straddle zero: mass is large, direct erf difference is stable
  return std::log(0.5 * (std::erf(b / kSqrt2) - std::erf(a / kSqrt2)));
}

// AS 241 algorithm PPND16
double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw numeric_error("norm_quantile: p outside (0,1)");
  double q = p - 0.5;
  double r;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

double poisson_log_pmf(long long k, double mu) {
  if (k < 0) return -kInf;
  if (mu < 0.0) throw numeric_error("poisson_log_pmf: negative mean");
  if (mu == 0.0) return k == 0 ? 0.0 : -kInf;
  return static_cast<double>(k) * std::log(mu) - mu - std::lgamma(static_cast<double>(k) + 1.0);
}

double gamma_log_pdf(double x, double shape, double rate) {
  if (shape <= 0.0 || rate <= 0.0) throw param_error("gamma_log_pdf: shape and rate must be positive");
  if (x <= 0.0) return -kInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double slice_sample(const std::function<double(double)>& log_f, double x0,
                    const SliceOptions& opt, std::mt19937_64& rng) {
  auto unif = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  double f0 = log_f(x0);
  if (!std::isfinite(f0))
    throw numeric_error("slice_sample: log density not finite at the current point");
  double y = f0 - (-std::log(unif()));  // log level of the horizontal slice

  // stepping out
  double u = unif();
  double L = std::max(x0 - opt.width * u, opt.lo);
  double R = std::min(L + opt.width, opt.hi);
  int j = static_cast<int>(std::floor(opt.max_steps * unif()));
  int k = opt.max_steps - 1 - j;
  while (j-- > 0 && L > opt.lo && log_f(L) > y) L = std::max(L - opt.width, opt.lo);
  while (k-- > 0 && R < opt.hi && log_f(R) > y) R = std::min(R + opt.width, opt.hi);

  // shrinkage
  for (int it = 0; it < 1000; ++it) {
    double x1 = L + (R - L) * unif();
    if (log_f(x1) > y) return x1;
    if (x1 < x0)
      L = x1;
    else
      R = x1;
  }
  throw numeric_error("slice_sample: shrinkage failed to find an acceptable point");
}

GaussHermite gauss_hermite(int n) {
  if (n < 1) throw param_error("gauss_hermite: need at least one node");
  Mat jac = Mat::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    double off = std::sqrt(i / 2.0);
    jac(i, i - 1) = off;
    jac(i - 1, i) = off;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(jac);
  GaussHermite gh;
  gh.nodes = es.eigenvalues();
  gh.weights = kSqrtPi * es.eigenvectors().row(0).transpose().array().square();
  return gh;
}

}  // namespace plasticnet
