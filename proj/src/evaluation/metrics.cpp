#include "mcnet/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "mcnet/core/errors.hpp"

namespace mcnet {

double auc(const Eigen::VectorXd& scores, const Eigen::VectorXi& labels) {
  require(scores.size() == labels.size(), "auc: size mismatch");
  const Eigen::Index n = scores.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores(a) < scores(b); });

  // midranks over tie groups
  double pos_rank_sum = 0;
  long n_pos = 0;
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && scores(order[j + 1]) == scores(order[i])) ++j;
    const double rank = 0.5 * double(i + j) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) {
      if (labels(order[k]) == 1) {
        pos_rank_sum += rank;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const long n_neg = long(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetric("auc: labels contain a single class");
  return (pos_rank_sum - double(n_pos) * double(n_pos + 1) / 2.0) / (double(n_pos) * double(n_neg));
}

double accuracy(const Eigen::VectorXd& scores, const Eigen::VectorXi& labels, double threshold) {
  require(scores.size() == labels.size(), "accuracy: size mismatch");
  if (scores.size() == 0) throw UndefinedMetric("accuracy: no samples");
  long hit = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) hit += int(scores(i) >= threshold) == labels(i);
  return double(hit) / double(scores.size());
}

double balanced_accuracy(const Eigen::VectorXd& scores, const Eigen::VectorXi& labels, double threshold) {
  require(scores.size() == labels.size(), "balanced_accuracy: size mismatch");
  long tp = 0, pos = 0, tn = 0, neg = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const bool pred = scores(i) >= threshold;
    if (labels(i) == 1) {
      ++pos;
      tp += pred;
    } else {
      ++neg;
      tn += !pred;
    }
  }
  if (pos == 0 || neg == 0) throw UndefinedMetric("balanced_accuracy: labels contain a single class");
  return 0.5 * (double(tp) / double(pos) + double(tn) / double(neg));
}

void ErrorAccumulator::add(const Eigen::Ref<const Eigen::RowVectorXd>& estimate,
                           const Eigen::Ref<const Eigen::RowVectorXd>& observed) {
  require(estimate.size() == observed.size(), "ErrorAccumulator: size mismatch");
  const Eigen::RowVectorXd d = estimate - observed;
  abs_sum += d.cwiseAbs().sum();
  sq_sum += d.squaredNorm();
  count += d.size();
}

double ErrorAccumulator::mae() const {
  if (count == 0) throw UndefinedMetric("mae: no present entries");
  return abs_sum / double(count);
}

double ErrorAccumulator::rmse() const {
  if (count == 0) throw UndefinedMetric("rmse: no present entries");
  return std::sqrt(sq_sum / double(count));
}

TTestResult paired_t_test(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  require(a.size() == b.size(), "paired_t_test: size mismatch");
  if (a.size() < 2) throw UndefinedMetric("paired_t_test: need at least two pairs");
  const Eigen::VectorXd d = a - b;
  const double n = double(d.size());
  const double mean = d.mean();
  const double var = (d.array() - mean).square().sum() / (n - 1);
  TTestResult r;
  r.df = n - 1;
  if (var == 0) {
    r.t = mean == 0 ? 0 : std::copysign(INFINITY, mean);
    r.p = mean == 0 ? 1 : 0;
    return r;
  }
  r.t = mean / std::sqrt(var / n);
  boost::math::students_t dist(r.df);
  r.p = 2 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

}  // namespace mcnet
