#pragma once

#include <cmath>

#include "mcnet/core/errors.hpp"
#include "mcnet/core/parameter_store.hpp"

namespace mcnet {

struct AdamConfig {
  double lr = 5e-3;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(lr > 0)) throw ConfigError("adam: lr must be > 0");
    if (!(eps > 0)) throw ConfigError("adam: eps must be > 0");
    if (!(weight_decay >= 0)) throw ConfigError("adam: weight_decay must be >= 0");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("adam: betas must lie in [0, 1)");
  }
};

/// One Adam update over every parameter accepted by `filter`. Weight decay is
/// coupled: weight_decay * p is added to the gradient before the moment
/// updates. `step` is the 1-based update count used for bias correction.
template <typename Scalar>
void adam_step(BasicParameterStore<Scalar>& store, const AdamConfig& cfg, long step,
               const ParamFilter& filter = all_params()) {
  cfg.validate();
  if (step < 1) throw ConfigError("adam: step must be >= 1");
  const Scalar b1 = Scalar(cfg.beta1), b2 = Scalar(cfg.beta2);
  const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(step));
  const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(step));
  for (auto& [name, e] : store) {
    if (!filter(name)) continue;
    if (e.moment1.size() == 0) {
      e.moment1 = MatrixX<Scalar>::Zero(e.value.rows(), e.value.cols());
      e.moment2 = MatrixX<Scalar>::Zero(e.value.rows(), e.value.cols());
    }
    MatrixX<Scalar> g = e.grad + Scalar(cfg.weight_decay) * e.value;
    e.moment1 = b1 * e.moment1 + (Scalar(1) - b1) * g;
    e.moment2 = b2 * e.moment2 + (Scalar(1) - b2) * g.cwiseProduct(g);
    e.value.array() -= Scalar(cfg.lr) * (e.moment1.array() / c1) / ((e.moment2.array() / c2).sqrt() + Scalar(cfg.eps));
  }
}

}  // namespace mcnet
