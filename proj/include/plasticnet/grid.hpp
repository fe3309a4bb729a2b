#pragma once

#include "plasticnet/common.hpp"

namespace plasticnet {

// Two nested uniform partitions of [0, T): a fine grid for the point-process
// likelihood and a coarse grid on which synaptic weights are piecewise
// constant. The coarse step must be an integer multiple of the fine step.
struct TimeGrid {
  double duration_s = 0.0;
  double fine_dt_s = 1e-3;
  double coarse_dt_s = 1.0;
  int n_fine = 0;
  int n_coarse = 0;
  int fine_per_coarse = 0;

  TimeGrid() = default;
  TimeGrid(double duration, double fine_dt = 1e-3, double coarse_dt = 1.0);

  int coarse_of(int fine_idx) const { return fine_idx / fine_per_coarse; }
  int window_begin(int k) const { return k * fine_per_coarse; }
  int window_end(int k) const { return (k + 1) * fine_per_coarse; }
  // fine bin containing time t in [0, T)
  int bin_of_time(double t) const;
};

}  // namespace plasticnet
