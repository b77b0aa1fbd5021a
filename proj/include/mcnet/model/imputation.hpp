#pragma once

#include <array>
#include <utility>
#include <vector>

#include "mcnet/model/batch.hpp"
#include "mcnet/model/minimal_rnn.hpp"

namespace mcnet {

/// PET estimate from the same-visit MRI hidden state:
/// tanh(h_mri W_cs + b_cs).
Var estimate_cross_pet(const Var& h_mri, const Var& w_cs, const Var& b_cs);

/// Linear estimates of MRI and PET at t from the previous hidden states:
/// [h_mri, h_pet] W_lg + b_lg, split into the first and second D columns.
/// `t` is the visit being estimated and must be past baseline.
std::pair<Var, Var> estimate_longitudinal(const Var& h_mri_prev, const Var& h_pet_prev, const Var& w_lg,
                                          const Var& b_lg, int t);

/// alpha = exp(a) / (exp(a) + exp(b)), beta = 1 - alpha, from a 1 x 2 logit
/// row (a, b). Both returned as 1 x 1 nodes.
std::pair<Var, Var> mixing_coefficients(const Var& logits);

/// alpha * x_cs + beta * x_lg for t > 0; x_cs at baseline (t == 0).
Var combine_pet(const Var& x_cs, const Var& x_lg, const Var& alpha, const Var& beta, int t);

/// u = x where the mask bit is set, else the estimate. Unmasked rows of x are
/// never read.
Var impute_timepoint(const Var& x, const Mask& m, const Var& x_hat);

/// Every intermediate of one rollout. Vectors are indexed by visit.
struct RolloutTrace {
  int visits = 0;
  std::vector<std::array<Var, 2>> h;      // top-layer hidden state
  std::vector<std::array<std::vector<Var>, 2>> layers;  // all layers
  std::vector<Var> x_hat_mri;             // invalid at t = 0
  std::vector<Var> x_cs_pet;
  std::vector<Var> x_lg_pet;              // invalid at t = 0
  std::vector<Var> x_hat_pet;
  std::vector<std::array<Var, 2>> u;
  std::vector<std::array<Var, 2>> x_in;   // observed-feature leaves
  Var alpha, beta;

  const Var& estimate(Modality s, int t) const { return s == Modality::Mri ? x_hat_mri[t] : x_hat_pet[t]; }
};

struct RolloutOptions {
  ImputeMode mode = ImputeMode::Model;
  /// Observed features enter as gradient-tracking leaves (for attribution).
  bool track_inputs = false;
};

/// Interleaves estimation, imputation and the per-modality stacks over the
/// visit grid. Within a visit the MRI branch advances first so the PET
/// estimate can read the same-visit MRI hidden state.
RolloutTrace rollout(const ParamAccess& p, const ModelConfig& cfg, const Batch& batch, const RolloutOptions& opt = {});

/// Masked mean absolute error between observed features and estimates,
/// averaged over contributing scalar entries. MRI contributes from t = 1 on;
/// PET from baseline on. Returns a 1 x 1 node (0 when nothing contributes).
Var estimation_loss(const RolloutTrace& trace, const Batch& batch);

}  // namespace mcnet
