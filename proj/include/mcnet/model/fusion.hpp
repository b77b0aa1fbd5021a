#pragma once

#include <span>
#include <string>
#include <vector>

#include "mcnet/model/imputation.hpp"

namespace mcnet {

/// Output of a multi-head attention block with a residual connection.
struct AttentionOutput {
  std::vector<Var> tokens;  // same count and width as the input tokens
  /// weights[head][query] is B x n_tokens; each row sums to 1.
  std::vector<std::vector<Eigen::MatrixXd>> weights;
};

/// Tokens are B x d nodes. For head j the query/key/value projections are
/// columns [j*d/J, (j+1)*d/J) of "<prefix>.w_q/w_k/w_v" (each d x d). Scores
/// are scaled by 1/sqrt(d/J) and softmaxed over the key axis; heads are
/// concatenated, projected by "<prefix>.w_o", shifted by "<prefix>.b_o" and
/// added back onto the input token.
AttentionOutput attention_block(const ParamAccess& p, const std::string& prefix, std::span<const Var> tokens, int heads);

/// Fuses the two modality tokens of one visit; returns [MRI-slot, PET-slot].
AttentionOutput modality_attention(const ParamAccess& p, const ModelConfig& cfg, const Var& h_mri, const Var& h_pet);

/// Fuses the per-visit features (each B x 2D') over the time axis.
AttentionOutput temporal_attention(const ParamAccess& p, const ModelConfig& cfg, std::span<const Var> fused);

/// softmax(H W_cls + b_cls) over {unchanged, changed}; H is B x 2D'.
Var longitudinal_head(const ParamAccess& p, const Var& fused);

/// softmax(H W_c + b_c) over {sMCI, pMCI}; H is the reduced token matrix.
Var conversion_head(const ParamAccess& p, const Var& reduced);

/// Flatten (concatenate) or mean-pool tokens for a head.
Var reduce_tokens(std::span<const Var> tokens, HeadReduction r);

/// Masked cross-entropy of the change probability, averaged over
/// contributing (subject, visit) pairs. probs[t] is B x 2.
Var cls_loss(std::span<const Var> probs, std::span<const Eigen::VectorXd> y, std::span<const Mask> mri_mask);

/// -mu (1 - p_true)^gamma log p_true averaged over the batch.
Var focal_loss(const Var& probs, const Eigen::VectorXd& c, double mu = 0.3, double gamma = 2.0);

}  // namespace mcnet
