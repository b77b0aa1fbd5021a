#pragma once

#include <vector>

#include "mcnet/model/adversarial.hpp"
#include "mcnet/model/fusion.hpp"

namespace mcnet {

/// Rollout plus both prediction heads.
struct ModelOutput {
  RolloutTrace trace;
  std::vector<Var> fused;         // per visit, B x 2D'
  std::vector<Var> change_probs;  // per visit, B x 2
  Var conversion_probs;           // B x 2, column 1 = pMCI
  std::vector<AttentionOutput> modality_attn;  // per visit; empty without cross-attention
  AttentionOutput temporal_attn;
};

ModelOutput forward(const ParamAccess& p, const ModelConfig& cfg, const Batch& batch, const RolloutOptions& opt = {});

}  // namespace mcnet
