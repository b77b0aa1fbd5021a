#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mcnet/data/cohort.hpp"

namespace mcnet {

/// Parameters of the synthetic progression generator. Each subject carries a
/// two-dimensional latent state: a severity that drifts linearly with visit
/// time (fast for pMCI, slow for sMCI) and a class-independent nuisance
/// trajectory. MRI features are linear in the latent state; PET features are
/// tanh of an affine image of it. Only `severity_features` features per
/// modality load on severity.
struct SynthConfig {
  int n_subjects = 600;
  int d = 20;
  int t = kDefaultVisits;
  double p_pet_bl_missing = 0.2;  // PET missing at baseline
  double p_mri_missing = 0.3;     // per later visit
  double p_pet_missing = 0.3;     // per later visit
  double attrition = 0.05;        // per later visit, monotone
  double noise_sd = 0.1;
  double class_balance = 0.4;  // fraction pMCI
  int severity_features = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthCohort {
  Cohort cohort;
  /// Indices of the severity-loaded features per modality, ascending.
  std::array<std::vector<int>, 2> severity_features;
};

/// Visit times in years for the grid positions (BL, M06, M12, M24, M36 for
/// five visits; evenly spaced half-years beyond that).
std::vector<double> visit_times(int visits);

SynthCohort generate_cohort(const SynthConfig& config);

}  // namespace mcnet
