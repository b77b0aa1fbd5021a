#pragma once

#include <cstdint>
#include <string>

#include "mcnet/core/checkpoint.hpp"
#include "mcnet/training/training.hpp"

namespace mcnet {

/// A trained model with everything needed to evaluate it on a raw cohort.
struct LoadedModel {
  ParameterStore params;
  ModelConfig model;
  NormStats norm;
  std::array<Eigen::RowVectorXd, 2> fill_mean;
  std::uint64_t split_seed = 0;
  HoldOut holdout;
};

/// Metadata holds the model configuration, split seed and hold-out folds;
/// arrays hold "param/*", "norm/{mean,sd}/<modality>" and "fill/<modality>".
Checkpoint model_checkpoint(const TrainResult& result, const Cohort& cohort, const TrainConfig& config);
LoadedModel load_model(const Checkpoint& ckpt);

/// Split and normalise a raw cohort the way the model was trained.
Cohort prepare_for(const LoadedModel& m, const Cohort& raw);

}  // namespace mcnet
