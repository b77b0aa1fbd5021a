#include "mcnet/model/imputation.hpp"

#include "mcnet/core/errors.hpp"

namespace mcnet {

Var estimate_cross_pet(const Var& h_mri, const Var& w_cs, const Var& b_cs) { return tanh(affine(h_mri, w_cs, b_cs)); }

std::pair<Var, Var> estimate_longitudinal(const Var& h_mri_prev, const Var& h_pet_prev, const Var& w_lg,
                                          const Var& b_lg, int t) {
  if (t < 1) throw ContractViolation("estimate_longitudinal: no previous visit at baseline");
  if (w_lg.cols() % 2 != 0) throw ContractViolation("estimate_longitudinal: w_lg must have 2D columns");
  const Eigen::Index d = w_lg.cols() / 2;
  Var both = affine(concat_cols({h_mri_prev, h_pet_prev}), w_lg, b_lg);
  return {slice_cols(both, 0, d), slice_cols(both, d, d)};
}

std::pair<Var, Var> mixing_coefficients(const Var& logits) {
  require(logits.rows() == 1 && logits.cols() == 2, "mixing_coefficients: logits must be 1 x 2");
  Var w = softmax_rows(logits);
  return {slice_cols(w, 0, 1), slice_cols(w, 1, 1)};
}

Var combine_pet(const Var& x_cs, const Var& x_lg, const Var& alpha, const Var& beta, int t) {
  if (t == 0) return x_cs;
  return scalar_mul(alpha, x_cs) + scalar_mul(beta, x_lg);
}

Var impute_timepoint(const Var& x, const Mask& m, const Var& x_hat) { return select_rows(m, x, x_hat); }

RolloutTrace rollout(const ParamAccess& p, const ModelConfig& cfg, const Batch& batch, const RolloutOptions& opt) {
  const int T = batch.visits, B = batch.size, H = cfg.hidden;
  require(batch.dim == cfg.dim, "rollout: batch feature width does not match the model");
  require(T == cfg.visits, "rollout: batch visit grid does not match the model");
  require(B > 0, "rollout: empty batch");
  if (!batch.input_mask[0][idx(Modality::Mri)].all())
    throw RolloutError("rollout: MRI missing at baseline for at least one subject");
  if (opt.mode != ImputeMode::Model) require(!batch.fill.empty(), "rollout: fill values missing for fill strategy");

  Tape& tape = p.tape;
  std::array<std::vector<CellParams>, 2> stacks;
  std::array<std::vector<Var>, 2> state;
  for (auto s : kModalities) {
    for (int l = 0; l < cfg.layers; ++l) stacks[idx(s)].push_back(cell_params(p, cell_prefix(s, l)));
    state[idx(s)].assign(cfg.layers, tape.constant(Eigen::MatrixXd::Zero(B, H)));
  }
  const Var w_cs = p("imp.w_cs"), b_cs = p("imp.b_cs");
  const Var w_lg = p("imp.w_lg"), b_lg = p("imp.b_lg");

  RolloutTrace tr;
  tr.visits = T;
  std::tie(tr.alpha, tr.beta) = mixing_coefficients(p("imp.mix"));
  tr.h.resize(T);
  tr.layers.resize(T);
  tr.x_hat_mri.resize(T);
  tr.x_cs_pet.resize(T);
  tr.x_lg_pet.resize(T);
  tr.x_hat_pet.resize(T);
  tr.u.resize(T);
  tr.x_in.resize(T);

  auto substitute = [&](int t, Modality s, const Var& estimate) {
    if (opt.mode == ImputeMode::Model) return estimate;
    return tape.constant(batch.fill[t][idx(s)]);
  };
  auto advance = [&](int t, Modality s) {
    state[idx(s)] = stack_forward(tr.u[t][idx(s)], state[idx(s)], stacks[idx(s)]);
    tr.layers[t][idx(s)] = state[idx(s)];
    tr.h[t][idx(s)] = state[idx(s)].back();
  };

  for (int t = 0; t < T; ++t) {
    for (auto s : kModalities)
      tr.x_in[t][idx(s)] = opt.track_inputs ? tape.variable(batch.x[t][idx(s)]) : tape.constant(batch.x[t][idx(s)]);
    const auto& m_mri = batch.input_mask[t][idx(Modality::Mri)];
    const auto& m_pet = batch.input_mask[t][idx(Modality::Pet)];

    if (t == 0) {
      tr.u[t][idx(Modality::Mri)] = tr.x_in[t][idx(Modality::Mri)];
      advance(t, Modality::Mri);
      tr.x_cs_pet[t] = estimate_cross_pet(tr.h[t][idx(Modality::Mri)], w_cs, b_cs);
      tr.x_hat_pet[t] = tr.x_cs_pet[t];
    } else {
      std::tie(tr.x_hat_mri[t], tr.x_lg_pet[t]) =
          estimate_longitudinal(tr.h[t - 1][idx(Modality::Mri)], tr.h[t - 1][idx(Modality::Pet)], w_lg, b_lg, t);
      tr.u[t][idx(Modality::Mri)] =
          impute_timepoint(tr.x_in[t][idx(Modality::Mri)], m_mri, substitute(t, Modality::Mri, tr.x_hat_mri[t]));
      advance(t, Modality::Mri);
      tr.x_cs_pet[t] = estimate_cross_pet(tr.h[t][idx(Modality::Mri)], w_cs, b_cs);
      tr.x_hat_pet[t] = combine_pet(tr.x_cs_pet[t], tr.x_lg_pet[t], tr.alpha, tr.beta, t);
    }
    tr.u[t][idx(Modality::Pet)] =
        impute_timepoint(tr.x_in[t][idx(Modality::Pet)], m_pet, substitute(t, Modality::Pet, tr.x_hat_pet[t]));
    advance(t, Modality::Pet);
  }
  return tr;
}

Var estimation_loss(const RolloutTrace& trace, const Batch& batch) {
  Tape& tape = trace.x_hat_pet[0].tape();
  Var total;
  long count = 0;
  auto add = [&](const Var& est, const Eigen::MatrixXd& x, const Mask& m) {
    const long n = m.count();
    if (n == 0) return;
    count += n * batch.dim;
    Var term = masked_abs_sum(x, m, est);
    total = total.valid() ? total + term : term;
  };
  for (int t = 0; t < trace.visits; ++t) {
    if (t > 0) add(trace.x_hat_mri[t], batch.x[t][idx(Modality::Mri)], batch.target_mask[t][idx(Modality::Mri)]);
    add(trace.x_hat_pet[t], batch.x[t][idx(Modality::Pet)], batch.target_mask[t][idx(Modality::Pet)]);
  }
  if (count == 0) return tape.constant(Eigen::MatrixXd::Zero(1, 1));
  return (1.0 / double(count)) * total;
}

}  // namespace mcnet
