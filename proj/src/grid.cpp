#include "plasticnet/grid.hpp"

#include <cmath>

namespace plasticnet {

namespace {
int checked_ratio(double whole, double part, const char* what) {
  double r = whole / part;
  int n = static_cast<int>(std::lround(r));
  if (n < 1 || std::abs(r - n) > 1e-9 * r)
    throw param_error(std::string("TimeGrid: ") + what + " must divide evenly");
  return n;
}
}  // namespace

TimeGrid::TimeGrid(double duration, double fine_dt, double coarse_dt)
    : duration_s(duration), fine_dt_s(fine_dt), coarse_dt_s(coarse_dt) {
  if (!(duration > 0.0) || !(fine_dt > 0.0) || !(coarse_dt > 0.0))
    throw param_error("TimeGrid: duration and steps must be positive");
  fine_per_coarse = checked_ratio(coarse_dt, fine_dt, "fine step into coarse step");
  n_coarse = checked_ratio(duration, coarse_dt, "coarse step into duration");
  n_fine = n_coarse * fine_per_coarse;
}

int TimeGrid::bin_of_time(double t) const {
  if (t < 0.0 || t >= duration_s) throw param_error("TimeGrid: time outside [0, T)");
  int b = static_cast<int>(t / fine_dt_s);
  return b < n_fine ? b : n_fine - 1;
}

}  // namespace plasticnet
