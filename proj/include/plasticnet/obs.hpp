#pragma once

#include "plasticnet/common.hpp"

namespace plasticnet {

// Observation density seen by the sequential samplers: log likelihood of one
// coarse window as a function of a scalar latent weight. Implementations fix
// everything else (other weights, parameters, features) at construction.
struct WindowObs {
  virtual ~WindowObs() = default;
  virtual int n_steps() const = 0;
  virtual double log_lik(int k, double w) const = 0;
  // batched evaluation over particles; default is the scalar loop
  virtual void log_lik_batch(int k, const Arr& w, Arr& out) const {
    out.resize(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) out[i] = log_lik(k, w[i]);
  }
};

}  // namespace plasticnet
