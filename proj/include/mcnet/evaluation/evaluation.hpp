#pragma once

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcnet/evaluation/metrics.hpp"
#include "mcnet/training/training.hpp"

namespace mcnet {

/// Per-modality estimation error on present entries. A modality with no
/// contributing entries has no value; UndefinedMetric when neither has any.
struct ImputationErrors {
  std::array<std::optional<double>, 2> mae;
  std::array<std::optional<double>, 2> rmse;
  std::array<long, 2> count{0, 0};  // scalar entries
};

/// Model estimates against observed rows: MRI for t >= 1 (no estimate exists
/// at baseline), PET for every visit. Only rows whose target mask is set are
/// read; `baseline_only` keeps just the baseline PET rows.
ImputationErrors imputation_errors(const RolloutTrace& trace, const Batch& batch, bool baseline_only = false);

/// Leave-entry-out error of a fill strategy: every present row is hidden in
/// turn and filled from the remaining present rows of the same subject.
/// `fallback` replaces rows with nothing to carry (Forward/Linear); Mean
/// always uses it.
ImputationErrors fill_errors(const Cohort& cohort, std::span<const int> indices, ImputeMode strategy,
                             const std::array<Eigen::RowVectorXd, 2>& fallback, bool baseline_only = false);

/// Copy of `cohort` with every masked row filled (masks are unchanged).
/// Forward and Linear work on the visit grid and fall back to the
/// training-set mean; Mean uses the per-class training mean.
Cohort fill_baseline(const Cohort& cohort, ImputeMode strategy, std::span<const int> training);

struct MetricsReport {
  std::string variant = "full";
  long n_eval = 0;
  double acc = 0, auc = 0, bac = 0;
  ImputationErrors imputation;
};

std::string to_json_line(const MetricsReport& r);
std::string format_table(std::span<const MetricsReport> reports);

struct EvalOptions {
  bool bl_only = false;   // read baseline rows only
  bool mri_only = false;  // baseline PET withheld from the inputs
};

/// Conversion metrics on BL-only inputs plus imputation errors on `indices`.
MetricsReport evaluate(ParameterStore& params, const ModelConfig& cfg, const Cohort& cohort,
                       std::span<const int> indices, const std::array<Eigen::RowVectorXd, 2>& fill_mean,
                       const EvalOptions& opt = {});

enum class AttributionHead { Longitudinal, Conversion };

struct Attribution {
  std::array<Eigen::MatrixXd, 2> score;             // [modality] T x D, mean |gradient|
  std::array<Eigen::VectorXi, 2> present;           // [modality] subjects averaged per visit
  std::array<std::vector<std::vector<int>>, 2> top;  // [modality][t] feature indices, descending
  std::vector<std::string> warnings;
};

/// Mean absolute input gradient of the pMCI/change probability over subjects
/// whose row is present. With the longitudinal head, visit t is attributed
/// through the change probability at t; with the conversion head, through
/// the single conversion probability. `k` is clipped to D.
Attribution attribute_rois(ParameterStore& params, const ModelConfig& cfg, const Cohort& cohort,
                           std::span<const int> indices, int k, const std::array<Eigen::RowVectorXd, 2>& fill_mean,
                           AttributionHead head = AttributionHead::Longitudinal);

std::string format_attribution(const Attribution& a);

/// Trains the full model and one variant per set axis under the same seed
/// and split, and evaluates each on the test fold.
std::vector<MetricsReport> run_ablation(const Cohort& cohort, const TrainConfig& config, const Ablation& axes,
                                        const EvalOptions& opt = {});

}  // namespace mcnet
