#pragma once

#include <cmath>
#include <vector>

#include "vda/errors.hpp"
#include "vda/types.hpp"

namespace vda {

/// Power-decay learning rate: eta0 * (1 + 10 p)^-0.75 with training
/// progress p in [0, 1].
inline double lr_schedule(double eta0, double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw ParameterError("training progress must lie in [0, 1]");
  return eta0 * std::pow(1.0 + 10.0 * p, -0.75);
}

template <typename Scalar>
struct SgdConfig {
  Scalar momentum = Scalar(0.9);
  Scalar weight_decay = Scalar(1e-3);
};

/// Classic SGD with momentum: v <- m*v + (g + wd*p), p <- p - lr*v.
template <typename Scalar, typename ParamLike, typename GradLike>
void sgd_update(ParamLike& param, const GradLike& grad, ParamLike& velocity,
                Scalar lr, const SgdConfig<Scalar>& cfg) {
  velocity = cfg.momentum * velocity + (grad + cfg.weight_decay * param);
  param -= lr * velocity;
}

/// Velocity buffers for one stack of dense layers.
template <typename Scalar>
struct LayerStackOptState {
  std::vector<Matrix<Scalar>> vel_weight;
  std::vector<Vector<Scalar>> vel_bias;
};

}  // namespace vda
