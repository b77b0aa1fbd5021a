#pragma once

#include <vector>

#include "mcnet/model/imputation.hpp"

namespace mcnet {

inline constexpr double kLogClamp = 1e-7;

/// Perceptron D -> h1 -> h2 -> 1 with tanh hidden activations and a sigmoid
/// output: probability that each row is an observed (not imputed) vector.
/// `prefix` is "disc" or, with per-modality discriminators, "disc.mri"/"disc.pet".
Var discriminate(const ParamAccess& p, const std::string& prefix, const Var& u);

std::string discriminator_prefix(const ModelConfig& cfg, Modality s);

/// Discriminator output for one (visit, modality) cell of the batch, paired
/// with the mask that says whether the row was observed.
struct MaskedProbability {
  Var prob;  // B x 1
  Mask observed;
};

/// -[sum_{observed} log D + sum_{imputed} log(1 - D)] / #terms.
Var discriminator_loss(std::span<const MaskedProbability> probs);

/// sum_{imputed} log(1 - D) / #imputed terms; 0 when nothing was imputed.
/// Minimised by the generator side.
Var adversarial_loss(std::span<const MaskedProbability> probs);

/// Applies the discriminator to every imputed input u(t, S) of a trace.
/// With `detach_inputs`, gradients stop at u (discriminator update);
/// `p.track` controls whether they reach the discriminator weights.
std::vector<MaskedProbability> discriminate_trace(const ParamAccess& p, const ModelConfig& cfg,
                                                  const RolloutTrace& trace, const Batch& batch, bool detach_inputs);

}  // namespace mcnet
