#pragma once

#include <Eigen/Dense>

namespace mcnet {

/// Area under the ROC curve as the Mann-Whitney statistic; tied scores
/// count one half. Throws UndefinedMetric unless both classes occur.
double auc(const Eigen::VectorXd& scores, const Eigen::VectorXi& labels);

/// Fraction correct with `score >= threshold` predicting class 1.
double accuracy(const Eigen::VectorXd& scores, const Eigen::VectorXi& labels, double threshold = 0.5);

/// Mean of the per-class recalls at `threshold`.
double balanced_accuracy(const Eigen::VectorXd& scores, const Eigen::VectorXi& labels, double threshold = 0.5);

/// Running absolute and squared error over individual entries.
struct ErrorAccumulator {
  double abs_sum = 0;
  double sq_sum = 0;
  long count = 0;

  void add(const Eigen::Ref<const Eigen::RowVectorXd>& estimate, const Eigen::Ref<const Eigen::RowVectorXd>& observed);
  double mae() const;   // UndefinedMetric when empty
  double rmse() const;  // UndefinedMetric when empty
};

struct TTestResult {
  double t = 0;
  double df = 0;
  double p = 1;  // two-sided
};

/// Paired two-sided t-test on matched samples (e.g. AUC per split).
TTestResult paired_t_test(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace mcnet
