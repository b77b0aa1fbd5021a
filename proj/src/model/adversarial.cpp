#include "mcnet/model/adversarial.hpp"

#include "mcnet/core/errors.hpp"

namespace mcnet {

std::string discriminator_prefix(const ModelConfig& cfg, Modality s) {
  if (!cfg.per_modality_discriminator) return ns::kDiscriminator;
  return std::string(ns::kDiscriminator) + "." + std::string(modality_name(s));
}

Var discriminate(const ParamAccess& p, const std::string& prefix, const Var& u) {
  const Var w1 = p(prefix + ".w1");
  if (u.cols() != w1.rows()) throw ContractViolation("discriminate: input width does not match the discriminator");
  Var a = tanh(affine(u, w1, p(prefix + ".b1")));
  a = tanh(affine(a, p(prefix + ".w2"), p(prefix + ".b2")));
  return sigmoid(affine(a, p(prefix + ".w3"), p(prefix + ".b3")));
}

namespace {

Var mask_weights(Tape& tape, const Mask& m, bool want) {
  Eigen::MatrixXd w(m.size(), 1);
  for (Eigen::Index i = 0; i < m.size(); ++i) w(i, 0) = m(i) == want ? 1.0 : 0.0;
  return tape.constant(std::move(w));
}

}  // namespace

Var discriminator_loss(std::span<const MaskedProbability> probs) {
  require(!probs.empty(), "discriminator_loss: no inputs");
  Tape& tape = probs.front().prob.tape();
  Var total;
  long terms = 0;
  for (const auto& mp : probs) {
    require(mp.prob.cols() == 1 && mp.prob.rows() == mp.observed.size(), "discriminator_loss: shape mismatch");
    terms += mp.prob.rows();
    Var real = sum(scale_rows(log_clamped(mp.prob, kLogClamp, 1.0 - kLogClamp), mask_weights(tape, mp.observed, true)));
    Var fake = sum(
        scale_rows(log_clamped(one_minus(mp.prob), kLogClamp, 1.0 - kLogClamp), mask_weights(tape, mp.observed, false)));
    Var term = real + fake;
    total = total.valid() ? total + term : term;
  }
  return (-1.0 / double(terms)) * total;
}

Var adversarial_loss(std::span<const MaskedProbability> probs) {
  require(!probs.empty(), "adversarial_loss: no inputs");
  Tape& tape = probs.front().prob.tape();
  Var total;
  long terms = 0;
  for (const auto& mp : probs) {
    const long n = mp.observed.size() - mp.observed.count();
    if (n == 0) continue;
    terms += n;
    Var term = sum(
        scale_rows(log_clamped(one_minus(mp.prob), kLogClamp, 1.0 - kLogClamp), mask_weights(tape, mp.observed, false)));
    total = total.valid() ? total + term : term;
  }
  if (terms == 0) return tape.constant(Eigen::MatrixXd::Zero(1, 1));
  return (1.0 / double(terms)) * total;
}

std::vector<MaskedProbability> discriminate_trace(const ParamAccess& p, const ModelConfig& cfg,
                                                  const RolloutTrace& trace, const Batch& batch, bool detach_inputs) {
  std::vector<MaskedProbability> out;
  for (int t = 0; t < trace.visits; ++t) {
    for (auto s : kModalities) {
      const Var& u = trace.u[t][idx(s)];
      Var in = detach_inputs ? detach(u) : u;
      out.push_back({discriminate(p, discriminator_prefix(cfg, s), in), batch.input_mask[t][idx(s)]});
    }
  }
  return out;
}

}  // namespace mcnet
