#pragma once

#include <Eigen/Dense>

#include <array>
#include <span>
#include <vector>

#include "mcnet/data/cohort.hpp"
#include "mcnet/model/config.hpp"

namespace mcnet {

/// Which observations the model may read.
enum class InputRegime {
  All,           // every present visit
  BaselineOnly,  // masks at t > 0 forced to 0 on the input side
};

struct BatchOptions {
  InputRegime regime = InputRegime::All;
  bool drop_baseline_pet = false;  // MRI-only baseline
  ImputeMode fill = ImputeMode::Model;
  /// Per-modality fill values for Mean (and Forward/Linear fallbacks).
  std::array<Eigen::RowVectorXd, 2> fill_mean;
};

/// A set of subjects laid out one per row. Feature rows are copied verbatim,
/// masked rows included; only rows whose input mask is set are ever read by
/// the model, and only rows whose target mask is set are read by losses.
struct Batch {
  int size = 0;
  int visits = 0;
  int dim = 0;
  std::vector<int> subjects;  // cohort indices
  std::vector<std::array<Eigen::MatrixXd, 2>> x;  // [t][modality], B x D
  std::vector<std::array<Mask, 2>> input_mask;    // [t][modality]
  std::vector<std::array<Mask, 2>> target_mask;   // [t][modality]
  std::vector<Eigen::VectorXd> y;                 // [t], B
  Eigen::VectorXd c;                              // B
  /// Fill values for masked input rows; populated unless fill == Model.
  std::vector<std::array<Eigen::MatrixXd, 2>> fill;
};

Batch make_batch(const Cohort& cohort, std::span<const int> indices, const BatchOptions& opt = {});

/// Fill values for masked input rows of one subject and modality under a
/// baseline strategy. `present` marks input-visible visits; rows that are
/// not present are never read.
Eigen::MatrixXd fill_sequence(const Eigen::MatrixXd& x, const Mask& present, ImputeMode mode,
                              const Eigen::RowVectorXd& fallback);

/// Per-modality mean over present entries of the given subjects.
std::array<Eigen::RowVectorXd, 2> present_mean(const Cohort& cohort, std::span<const int> indices);

}  // namespace mcnet
