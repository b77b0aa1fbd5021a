#include "mcnet/evaluation/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "mcnet/core/errors.hpp"

namespace mcnet {
namespace {

ImputationErrors finish(const std::array<ErrorAccumulator, 2>& acc) {
  if (acc[0].count == 0 && acc[1].count == 0) throw UndefinedMetric("imputation errors: no present entries");
  ImputationErrors e;
  for (auto s : kModalities) {
    const auto& a = acc[idx(s)];
    e.count[idx(s)] = a.count;
    if (a.count == 0) continue;
    e.mae[idx(s)] = a.mae();
    e.rmse[idx(s)] = a.rmse();
  }
  return e;
}

Eigen::VectorXi labels_of(const Cohort& cohort, std::span<const int> indices) {
  Eigen::VectorXi y(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) y(i) = cohort.subjects[indices[i]].c;
  return y;
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string cell(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

}  // namespace

ImputationErrors imputation_errors(const RolloutTrace& trace, const Batch& batch, bool baseline_only) {
  std::array<ErrorAccumulator, 2> acc;
  const int T = baseline_only ? 1 : trace.visits;
  for (int t = 0; t < T; ++t) {
    for (auto s : kModalities) {
      if (s == Modality::Mri && t == 0) continue;
      const Eigen::MatrixXd& est = trace.estimate(s, t).value();
      const Mask& m = batch.target_mask[t][idx(s)];
      for (int i = 0; i < batch.size; ++i)
        if (m(i)) acc[idx(s)].add(est.row(i), batch.x[t][idx(s)].row(i));
    }
  }
  return finish(acc);
}

ImputationErrors fill_errors(const Cohort& cohort, std::span<const int> indices, ImputeMode strategy,
                             const std::array<Eigen::RowVectorXd, 2>& fallback, bool baseline_only) {
  require(strategy != ImputeMode::Model, "fill_errors: strategy must be a fill baseline");
  std::array<ErrorAccumulator, 2> acc;
  const int T = baseline_only ? 1 : cohort.visits;
  for (int i : indices) {
    const auto& r = cohort.subjects[i];
    for (auto s : kModalities) {
      Mask visible = r.mask(s);
      if (baseline_only) visible.tail(cohort.visits - 1).setConstant(false);
      for (int t = 0; t < T; ++t) {
        if (s == Modality::Mri && t == 0) continue;  // matches the model's evaluation set
        if (!r.present(s, t)) continue;
        Mask held = visible;
        held(t) = false;
        const Eigen::MatrixXd f = fill_sequence(r.features(s), held, strategy, fallback[idx(s)]);
        acc[idx(s)].add(f.row(t), r.features(s).row(t));
      }
    }
  }
  return finish(acc);
}

Cohort fill_baseline(const Cohort& cohort, ImputeMode strategy, std::span<const int> training) {
  require(strategy != ImputeMode::Model, "fill_baseline: strategy must be forward, linear or mean");
  const auto global = present_mean(cohort, training);
  std::array<std::array<Eigen::RowVectorXd, 2>, 2> per_class;  // [class][modality]
  for (int c = 0; c < 2; ++c) {
    std::vector<int> members;
    for (int i : training)
      if (cohort.subjects[i].c == c) members.push_back(i);
    per_class[c] = members.empty() ? global : present_mean(cohort, members);
  }
  Cohort out = cohort;
  for (auto& r : out.subjects) {
    for (auto s : kModalities) {
      const Eigen::RowVectorXd& fallback = strategy == ImputeMode::Mean ? per_class[r.c][idx(s)] : global[idx(s)];
      r.features(s) = fill_sequence(r.features(s), r.mask(s), strategy, fallback);
    }
  }
  return out;
}

std::string to_json_line(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["variant"] = r.variant;
  j["n_eval"] = r.n_eval;
  j["acc"] = r.acc;
  j["auc"] = r.auc;
  j["bac"] = r.bac;
  for (auto s : kModalities) {
    const std::string m(modality_name(s));
    j["mae_" + m] = optional_json(r.imputation.mae[idx(s)]);
    j["rmse_" + m] = optional_json(r.imputation.rmse[idx(s)]);
  }
  return j.dump();
}

std::string format_table(std::span<const MetricsReport> reports) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-12s %6s %7s %7s %7s %9s %9s %9s %9s\n", "variant", "n", "ACC", "AUC", "BAC",
                "MAE(MRI)", "RMSE(MRI)", "MAE(PET)", "RMSE(PET)");
  os << line;
  for (const auto& r : reports) {
    const auto& e = r.imputation;
    std::snprintf(line, sizeof(line), "%-12s %6ld %7.4f %7.4f %7.4f %9s %9s %9s %9s\n", r.variant.c_str(), r.n_eval,
                  r.acc, r.auc, r.bac, cell(e.mae[0]).c_str(), cell(e.rmse[0]).c_str(), cell(e.mae[1]).c_str(),
                  cell(e.rmse[1]).c_str());
    os << line;
  }
  return os.str();
}

MetricsReport evaluate(ParameterStore& params, const ModelConfig& cfg, const Cohort& cohort,
                       std::span<const int> indices, const std::array<Eigen::RowVectorXd, 2>& fill_mean,
                       const EvalOptions& opt) {
  if (indices.empty()) throw UndefinedMetric("evaluate: no subjects");
  BatchOptions bo;
  bo.regime = InputRegime::BaselineOnly;
  bo.drop_baseline_pet = opt.mri_only;
  bo.fill = cfg.impute;
  bo.fill_mean = fill_mean;

  MetricsReport r;
  r.n_eval = static_cast<long>(indices.size());
  const Eigen::VectorXd scores = predict_conversion(params, cfg, cohort, indices, bo);
  const Eigen::VectorXi y = labels_of(cohort, indices);
  r.auc = auc(scores, y);
  r.acc = accuracy(scores, y);
  r.bac = balanced_accuracy(scores, y);

  if (!opt.bl_only) bo.regime = InputRegime::All;
  const Batch batch = make_batch(cohort, indices, bo);
  Tape tape;
  const ParamAccess p{tape, params, Track::No};
  r.imputation = imputation_errors(rollout(p, cfg, batch, {cfg.impute, false}), batch, opt.bl_only);
  return r;
}

Attribution attribute_rois(ParameterStore& params, const ModelConfig& cfg, const Cohort& cohort,
                           std::span<const int> indices, int k, const std::array<Eigen::RowVectorXd, 2>& fill_mean,
                           AttributionHead head) {
  require(!indices.empty(), "attribute_rois: no subjects");
  require(k >= 1, "attribute_rois: k must be >= 1");
  const int T = cohort.visits, D = cohort.dim;
  Attribution a;
  if (k > D) {
    a.warnings.push_back("k=" + std::to_string(k) + " exceeds the feature count; clipped to " + std::to_string(D));
    k = D;
  }
  BatchOptions bo;
  bo.fill = cfg.impute;
  bo.fill_mean = fill_mean;
  const Batch batch = make_batch(cohort, indices, bo);
  Tape tape;
  const ParamAccess p{tape, params, Track::No};
  const ModelOutput out = forward(p, cfg, batch, {cfg.impute, true});

  for (auto s : kModalities) {
    a.score[idx(s)] = Eigen::MatrixXd::Zero(T, D);
    a.present[idx(s)] = Eigen::VectorXi::Zero(T);
  }
  auto accumulate = [&](int t) {
    for (auto s : kModalities) {
      const Eigen::MatrixXd g = tape.grad(out.trace.x_in[t][idx(s)]);
      const Mask& m = batch.input_mask[t][idx(s)];
      for (int i = 0; i < batch.size; ++i) {
        if (!m(i)) continue;
        a.score[idx(s)].row(t) += g.row(i).cwiseAbs();
        ++a.present[idx(s)](t);
      }
    }
  };
  // Rows are subjects and no operation mixes rows, so the gradient of the
  // summed probability holds each subject's own derivative in its row.
  if (head == AttributionHead::Conversion) {
    tape.backward(sum(slice_cols(out.conversion_probs, 1, 1)));
    for (int t = 0; t < T; ++t) accumulate(t);
  } else {
    for (int t = 0; t < T; ++t) {
      tape.backward(sum(slice_cols(out.change_probs[t], 1, 1)));
      accumulate(t);
    }
  }

  for (auto s : kModalities) {
    a.top[idx(s)].resize(T);
    for (int t = 0; t < T; ++t) {
      const int n = a.present[idx(s)](t);
      if (n > 0) a.score[idx(s)].row(t) /= double(n);
      std::vector<int> order(D);
      std::iota(order.begin(), order.end(), 0);
      const auto& row = a.score[idx(s)].row(t);
      std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return row(x) > row(y); });
      order.resize(k);
      a.top[idx(s)][t] = order;
    }
  }
  return a;
}

std::string format_attribution(const Attribution& a) {
  std::ostringstream os;
  os << "modality visit rank feature score\n";
  for (auto s : kModalities) {
    for (std::size_t t = 0; t < a.top[idx(s)].size(); ++t) {
      const auto& top = a.top[idx(s)][t];
      for (std::size_t r = 0; r < top.size(); ++r) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%s %zu %zu %d %.6e\n", std::string(modality_name(s)).c_str(), t, r + 1,
                      top[r], a.score[idx(s)](long(t), top[r]));
        os << buf;
      }
    }
  }
  return os.str();
}

std::vector<MetricsReport> run_ablation(const Cohort& cohort, const TrainConfig& config, const Ablation& axes,
                                        const EvalOptions& opt) {
  require(axes.any(), "run_ablation: no ablation axes given");
  std::vector<Ablation> variants{Ablation{}};
  if (axes.longitudinal_classification) variants.push_back({.longitudinal_classification = true});
  if (axes.cross_attention) variants.push_back({.cross_attention = true});
  if (axes.data_imputation) variants.push_back({.data_imputation = true});
  if (axes.adversarial) variants.push_back({.adversarial = true});

  const auto test = config.holdout.indices(cohort.folds, {config.holdout.test_fold});
  std::vector<MetricsReport> out;
  for (const auto& v : variants) {
    TrainConfig tc = config;
    tc.ablation = v;
    TrainResult r = train(cohort, tc);
    MetricsReport rep = evaluate(r.params, r.model, cohort, test, r.fill_mean, opt);
    rep.variant = v.any() ? "w/o " + v.to_string() : "full";
    out.push_back(rep);
  }
  return out;
}

}  // namespace mcnet
