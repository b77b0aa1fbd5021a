#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mcnet/core/adam.hpp"
#include "mcnet/data/cohort.hpp"
#include "mcnet/model/model.hpp"

namespace mcnet {

/// Weights of the overall objective
/// L = lambda * L_est + zeta * L_adv + xi * (L_cls + L_pred).
struct LossWeights {
  double lambda = 2.0;
  double zeta = 10.0;
  double xi = 10.0;

  void validate() const;
};

/// Scalar values of every loss term for one step.
struct LossBreakdown {
  double est = 0, adv = 0, cls = 0, pred = 0, disc = 0, total = 0;
};

double total_loss(double est, double adv, double cls, double pred, const LossWeights& w);

/// Components removed by an ablated variant.
struct Ablation {
  bool longitudinal_classification = false;  // LC: drop L_cls
  bool cross_attention = false;              // CB: concatenate instead of attending
  bool data_imputation = false;              // DI: mean fill, no L_est / L_adv
  bool adversarial = false;                  // AL: no discriminator, no L_adv

  bool any() const { return longitudinal_classification || cross_attention || data_imputation || adversarial; }
  std::string to_string() const;
  static Ablation parse(const std::string& csv);  // "LC,CB,DI,AL"
};

enum class Stage { A, B, C, Retrain };
std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

struct TrainConfig {
  LossWeights weights;
  AdamConfig adam;
  ModelConfig model;
  int batch_size = 32;
  int epochs_a = 100;
  int epochs_b = 100;
  int epochs_c = 50;
  int epochs_retrain = 0;
  int patience = 20;  // epochs without validation improvement before stopping a stage
  std::vector<Stage> stages{Stage::A, Stage::B, Stage::C, Stage::Retrain};
  bool cold_restart = false;  // reinitialise before the end-to-end retrain
  ImputeMode fill = ImputeMode::Model;  // Forward/Linear give the fill-baseline variants
  Ablation ablation;
  HoldOut holdout;
  std::uint64_t seed = 0;

  void validate() const;
  /// Model configuration with ablations and fill strategy applied.
  ModelConfig effective_model() const;
};

/// Which terms a step optimises and which parameters it may move.
struct StepPlan {
  bool est = false, adv = false, cls = false, pred = false;
  bool update_discriminator = false;
  bool heads = true;  // run the prediction module
  ParamFilter trainable;  // parameters moved by the main (non-discriminator) update
};

/// Per-stage optimiser bookkeeping.
struct StepCounters {
  long generator = 0;
  long discriminator = 0;
};

/// Loss terms built on a tape. Unused terms are constant zero nodes.
struct LossTerms {
  Var est, adv, cls, pred;
  ModelOutput output;
};

/// Builds the requested terms. L_est is the masked L1 error summed over
/// features and averaged over contributing (subject, visit, modality)
/// entries. `disc_access` is the lookup used for the discriminator inside
/// L_adv; pass a Track::No access for the stop-gradient contract, or a
/// tracking one for a full-derivative check.
LossTerms compute_loss_terms(const ParamAccess& p, const ParamAccess& disc_access, const ModelConfig& cfg,
                             const Batch& batch, const StepPlan& plan);

Var total_loss(const LossTerms& terms, const LossWeights& w);

/// One alternating update: (1) the discriminator on L_D with every other
/// parameter frozen and inputs detached; (2) the parameters accepted by
/// `plan.trainable` on the weighted objective, with the freshly updated
/// discriminator entering as constants.
LossBreakdown alternate_update(ParameterStore& params, const ModelConfig& cfg, const Batch& batch,
                               const StepPlan& plan, const TrainConfig& tc, StepCounters& counters);

struct EpochRecord {
  Stage stage;
  int epoch = 0;
  LossBreakdown loss;  // mean over the epoch's batches
  std::optional<double> val_auc;
  std::optional<double> val_mae;
};

std::string to_json_line(const EpochRecord& r);

struct TrainResult {
  ParameterStore params;
  ModelConfig model;
  std::vector<EpochRecord> log;
  std::array<Eigen::RowVectorXd, 2> fill_mean;
};

/// Splits with `seed`, normalises with the training folds of `holdout`.
Cohort prepare_cohort(const Cohort& raw, std::uint64_t seed, const HoldOut& holdout = {});

/// Runs the configured stages on a prepared cohort. Each EpochRecord is also
/// written to `log` as a JSON line when given.
TrainResult train(const Cohort& cohort, const TrainConfig& config, std::ostream* log = nullptr);

/// Probability of pMCI per subject.
Eigen::VectorXd predict_conversion(ParameterStore& params, const ModelConfig& cfg, const Cohort& cohort,
                                   std::span<const int> indices, const BatchOptions& opt);

/// Masked MAE per scalar entry over `indices` (no gradient).
double estimation_error(ParameterStore& params, const ModelConfig& cfg, const Cohort& cohort,
                        std::span<const int> indices, const BatchOptions& opt);

}  // namespace mcnet
