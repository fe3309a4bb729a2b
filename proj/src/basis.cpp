#include "plasticnet/basis.hpp"

#include <cmath>

namespace plasticnet {

BasisSet build_cosine_basis(int n_basis, double lag_max_s, const TimeGrid& grid) {
  if (n_basis < 1) throw param_error("build_cosine_basis: need at least one basis function");
  if (!(lag_max_s > 0.0) || lag_max_s > grid.duration_s)
    throw param_error("build_cosine_basis: lag_max must lie in (0, duration]");

  double dt = grid.fine_dt_s;
  int n_lags = static_cast<int>(std::lround(lag_max_s / dt));
  if (n_lags < n_basis)
    throw param_error("build_cosine_basis: lag grid too short for requested basis count");

  // log-warped lag axis; the shift keeps warp(0) finite so the first bump can
  // cover the shortest lags
  double shift = lag_max_s / 20.0;
  auto warp = [shift](double t) { return std::log(t + shift); };
  double lo = warp(0.0), hi = warp(lag_max_s);
  double spacing = (hi - lo) / (n_basis + 1);

  BasisSet basis;
  basis.n_impulse_basis = n_basis;
  basis.n_stim_basis = n_basis;
  basis.lag_max_s = lag_max_s;
  basis.fine_dt_s = dt;
  basis.impulse.resize(n_lags, n_basis);

  const double pi = 3.14159265358979323846;
  for (int b = 0; b < n_basis; ++b) {
    double center = lo + (b + 1) * spacing;
    for (int j = 0; j < n_lags; ++j) {
      double lag = (j + 1) * dt;
      double arg = (warp(lag) - center) * pi / (2.0 * spacing);
      arg = std::min(std::max(arg, -pi), pi);
      basis.impulse(j, b) = 0.5 * (1.0 + std::cos(arg));
    }
  }
  basis.stim = basis.impulse;

  for (int b = 0; b < n_basis; ++b) {
    double mass = basis.impulse.col(b).sum() * dt;
    if (!(mass > 0.0))
      throw param_error("build_cosine_basis: basis function vanished on the lag grid");
    basis.impulse.col(b) /= mass;
  }
  return basis;
}

}  // namespace plasticnet
