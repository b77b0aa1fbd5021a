#pragma once

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mcnet/core/tape.hpp"

namespace mcnet {

enum class Modality : int { Mri = 0, Pet = 1 };
inline constexpr std::array<Modality, 2> kModalities{Modality::Mri, Modality::Pet};
inline constexpr int idx(Modality s) { return static_cast<int>(s); }
std::string_view modality_name(Modality s);

/// Number of visits on the grid (BL, M06, M12, M24, M36).
inline constexpr int kDefaultVisits = 5;

/// One subject on the fixed visit grid. Feature rows whose mask bit is 0 are
/// allocated but carry no information and are never read.
struct SubjectRecord {
  std::string id;
  std::array<Eigen::MatrixXd, 2> x;  // per modality, T x D
  std::array<Mask, 2> m;             // per modality, T
  Eigen::VectorXi y;                 // T, 1 = status differs from BL
  int c = 0;                         // 1 = pMCI

  Eigen::MatrixXd& features(Modality s) { return x[idx(s)]; }
  const Eigen::MatrixXd& features(Modality s) const { return x[idx(s)]; }
  Mask& mask(Modality s) { return m[idx(s)]; }
  const Mask& mask(Modality s) const { return m[idx(s)]; }
  bool present(Modality s, int t) const { return m[idx(s)](t); }
};

struct NormStats {
  std::array<Eigen::RowVectorXd, 2> mean;
  std::array<Eigen::RowVectorXd, 2> sd;
  bool empty() const { return mean[0].size() == 0; }
};

/// fold index per subject, parallel to Cohort::subjects.
using SplitAssignment = std::vector<int>;

inline constexpr int kFolds = 10;

struct Cohort {
  int visits = kDefaultVisits;
  int dim = 0;
  std::vector<SubjectRecord> subjects;
  NormStats norm;
  SplitAssignment folds;
  std::vector<std::string> warnings;

  std::size_t size() const { return subjects.size(); }
};

/// Per-cell provenance tag for the `impute` output table.
enum class Provenance { Observed, ImputedCs, ImputedLg, ImputedMixed };
std::string_view provenance_name(Provenance p);

/// Optional provenance column, indexed [subject][visit][modality].
using ProvenanceTable = std::vector<std::vector<std::array<Provenance, 2>>>;

Cohort read_cohort(std::istream& in, int visits = kDefaultVisits);
Cohort load_cohort(const std::string& path, int visits = kDefaultVisits);
void write_cohort(std::ostream& out, const Cohort& cohort, const ProvenanceTable* provenance = nullptr);
void save_cohort(const std::string& path, const Cohort& cohort, const ProvenanceTable* provenance = nullptr);

/// Field-by-field equality; masked feature rows are compared bitwise so that
/// NaN placeholders compare equal to themselves.
bool same_records(const Cohort& a, const Cohort& b);

/// z-scores present entries with statistics from present entries of subjects
/// in `training_folds`. Requires folds to be assigned.
Cohort normalize(const Cohort& cohort, const std::set<int>& training_folds);
NormStats compute_norm_stats(const Cohort& cohort, const std::set<int>& training_folds,
                             std::vector<std::string>* warnings = nullptr);
/// Applies precomputed statistics to present entries only.
Cohort apply_normalization(const Cohort& cohort, const NormStats& stats);

/// Class-stratified assignment of subjects to kFolds folds.
SplitAssignment split_stratified(const Cohort& cohort, std::uint64_t seed);

/// Hold-out roles derived from a fold assignment: `test` and `validation`
/// are single folds, every other fold trains.
struct HoldOut {
  int test_fold = 0;
  int validation_fold = 1;
  std::set<int> training_folds() const;
  std::vector<int> indices(const SplitAssignment& folds, const std::set<int>& which) const;
};

}  // namespace mcnet
