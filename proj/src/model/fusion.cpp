#include "mcnet/model/fusion.hpp"

#include <cmath>

#include "mcnet/core/errors.hpp"
#include "mcnet/model/model.hpp"

namespace mcnet {

AttentionOutput attention_block(const ParamAccess& p, const std::string& prefix, std::span<const Var> tokens,
                                int heads) {
  require(!tokens.empty(), "attention_block: no tokens");
  const Eigen::Index d = tokens.front().cols();
  if (heads < 1 || d % heads != 0) throw ConfigError("attention_block: width " + std::to_string(d) +
                                                     " not divisible by " + std::to_string(heads) + " heads");
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(double(dh));
  const Var wq = p(prefix + ".w_q"), wk = p(prefix + ".w_k"), wv = p(prefix + ".w_v");
  const Var wo = p(prefix + ".w_o"), bo = p(prefix + ".b_o");
  const std::size_t n = tokens.size();

  std::vector<Var> q, k, v;
  for (const auto& x : tokens) {
    require(x.cols() == d, "attention_block: token width mismatch");
    q.push_back(matmul(x, wq));
    k.push_back(matmul(x, wk));
    v.push_back(matmul(x, wv));
  }

  AttentionOutput out;
  out.weights.assign(heads, std::vector<Eigen::MatrixXd>(n));
  std::vector<std::vector<Var>> per_query(n);
  for (int j = 0; j < heads; ++j) {
    std::vector<Var> kj, vj;
    for (std::size_t b = 0; b < n; ++b) {
      kj.push_back(slice_cols(k[b], j * dh, dh));
      vj.push_back(slice_cols(v[b], j * dh, dh));
    }
    for (std::size_t a = 0; a < n; ++a) {
      Var qa = slice_cols(q[a], j * dh, dh);
      std::vector<Var> scores;
      for (std::size_t b = 0; b < n; ++b) scores.push_back(rowwise_dot(qa, kj[b]));
      Var w = softmax_rows(scale * concat_cols(std::span<const Var>(scores)));
      out.weights[j][a] = w.value();
      Var acc;
      for (std::size_t b = 0; b < n; ++b) {
        Var term = scale_rows(vj[b], slice_cols(w, static_cast<Eigen::Index>(b), 1));
        acc = acc.valid() ? acc + term : term;
      }
      per_query[a].push_back(acc);
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    Var heads_cat = concat_cols(std::span<const Var>(per_query[a]));
    out.tokens.push_back(add_row(matmul(heads_cat, wo), bo) + tokens[a]);
  }
  return out;
}

AttentionOutput modality_attention(const ParamAccess& p, const ModelConfig& cfg, const Var& h_mri, const Var& h_pet) {
  const Var toks[] = {h_mri, h_pet};
  return attention_block(p, ns::kModalityAttention, toks, cfg.heads);
}

AttentionOutput temporal_attention(const ParamAccess& p, const ModelConfig& cfg, std::span<const Var> fused) {
  return attention_block(p, ns::kTemporalAttention, fused, cfg.temporal_heads);
}

Var longitudinal_head(const ParamAccess& p, const Var& fused) {
  return softmax_rows(affine(fused, p("cls.w"), p("cls.b")));
}

Var conversion_head(const ParamAccess& p, const Var& reduced) {
  return softmax_rows(affine(reduced, p("conv.w"), p("conv.b")));
}

Var reduce_tokens(std::span<const Var> tokens, HeadReduction r) {
  require(!tokens.empty(), "reduce_tokens: no tokens");
  if (r == HeadReduction::Flatten) return concat_cols(tokens);
  Var acc = tokens.front();
  for (std::size_t i = 1; i < tokens.size(); ++i) acc = acc + tokens[i];
  return (1.0 / double(tokens.size())) * acc;
}

Var cls_loss(std::span<const Var> probs, std::span<const Eigen::VectorXd> y, std::span<const Mask> mri_mask) {
  require(!probs.empty() && probs.size() == y.size() && y.size() == mri_mask.size(), "cls_loss: misaligned inputs");
  Tape& tape = probs.front().tape();
  Var total;
  double count = 0;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    const auto& m = mri_mask[t];
    const Eigen::Index B = probs[t].rows();
    require(m.size() == B && y[t].size() == B, "cls_loss: batch size mismatch");
    if (m.count() == 0) continue;
    Eigen::MatrixXd w1(B, 1), w0(B, 1);
    for (Eigen::Index i = 0; i < B; ++i) {
      w1(i, 0) = m(i) ? y[t](i) : 0.0;
      w0(i, 0) = m(i) ? 1.0 - y[t](i) : 0.0;
    }
    count += double(m.count());
    Var lp1 = log_clamped(slice_cols(probs[t], 1, 1), kLogClamp, 1.0 - kLogClamp);
    Var lp0 = log_clamped(slice_cols(probs[t], 0, 1), kLogClamp, 1.0 - kLogClamp);
    Var term = sum(scale_rows(lp1, tape.constant(w1))) + sum(scale_rows(lp0, tape.constant(w0)));
    total = total.valid() ? total + term : term;
  }
  if (count == 0) return tape.constant(Eigen::MatrixXd::Zero(1, 1));
  return (-1.0 / count) * total;
}

Var focal_loss(const Var& probs, const Eigen::VectorXd& c, double mu, double gamma) {
  require(probs.cols() == 2 && probs.rows() == c.size(), "focal_loss: shape mismatch");
  Tape& tape = probs.tape();
  Eigen::MatrixXd w1 = c, w0 = (1.0 - c.array()).matrix();
  Var p_true = scale_rows(slice_cols(probs, 1, 1), tape.constant(w1)) + scale_rows(slice_cols(probs, 0, 1), tape.constant(w0));
  Var per = hadamard(pow(one_minus(p_true), gamma), log_clamped(p_true, kLogClamp, 1.0 - kLogClamp));
  return (-mu / double(c.size())) * sum(per);
}

ModelOutput forward(const ParamAccess& p, const ModelConfig& cfg, const Batch& batch, const RolloutOptions& opt) {
  ModelOutput out;
  out.trace = rollout(p, cfg, batch, opt);
  const int T = out.trace.visits;
  for (int t = 0; t < T; ++t) {
    const Var& hm = out.trace.h[t][idx(Modality::Mri)];
    const Var& hp = out.trace.h[t][idx(Modality::Pet)];
    if (cfg.cross_attention) {
      out.modality_attn.push_back(modality_attention(p, cfg, hm, hp));
      out.fused.push_back(concat_cols(std::span<const Var>(out.modality_attn.back().tokens)));
    } else {
      out.fused.push_back(concat_cols({hm, hp}));
    }
    out.change_probs.push_back(longitudinal_head(p, out.fused.back()));
  }
  std::vector<Var> final_tokens = out.fused;
  if (cfg.cross_attention) {
    out.temporal_attn = temporal_attention(p, cfg, out.fused);
    final_tokens = out.temporal_attn.tokens;
  }
  out.conversion_probs = conversion_head(p, reduce_tokens(final_tokens, cfg.reduction));
  return out;
}

}  // namespace mcnet
