#include "mcnet/model/batch.hpp"

#include "mcnet/core/errors.hpp"

namespace mcnet {

Eigen::MatrixXd fill_sequence(const Eigen::MatrixXd& x, const Mask& present, ImputeMode mode,
                              const Eigen::RowVectorXd& fallback) {
  const int T = static_cast<int>(x.rows());
  require(present.size() == T, "fill_sequence: mask length mismatch");
  require(fallback.size() == x.cols(), "fill_sequence: fallback width mismatch");
  Eigen::MatrixXd out(T, x.cols());
  for (int t = 0; t < T; ++t) {
    if (present(t)) {
      out.row(t) = x.row(t);
      continue;
    }
    int prev = -1, next = -1;
    for (int k = t - 1; k >= 0; --k)
      if (present(k)) {
        prev = k;
        break;
      }
    for (int k = t + 1; k < T; ++k)
      if (present(k)) {
        next = k;
        break;
      }
    switch (mode) {
      case ImputeMode::Model:
      case ImputeMode::Mean:
        out.row(t) = fallback;
        break;
      case ImputeMode::Forward:
        out.row(t) = prev >= 0 ? Eigen::RowVectorXd(x.row(prev)) : fallback;
        break;
      case ImputeMode::Linear:
        if (prev >= 0 && next >= 0) {
          const double w = double(t - prev) / double(next - prev);
          out.row(t) = (1.0 - w) * x.row(prev) + w * x.row(next);
        } else {
          out.row(t) = prev >= 0 ? Eigen::RowVectorXd(x.row(prev)) : fallback;
        }
        break;
    }
  }
  return out;
}

std::array<Eigen::RowVectorXd, 2> present_mean(const Cohort& cohort, std::span<const int> indices) {
  std::array<Eigen::RowVectorXd, 2> out;
  for (auto s : kModalities) {
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(cohort.dim);
    long n = 0;
    for (int i : indices) {
      const auto& r = cohort.subjects[i];
      for (int t = 0; t < cohort.visits; ++t)
        if (r.present(s, t)) {
          sum += r.features(s).row(t);
          ++n;
        }
    }
    out[idx(s)] = n > 0 ? Eigen::RowVectorXd(sum / double(n)) : sum;
  }
  return out;
}

Batch make_batch(const Cohort& cohort, std::span<const int> indices, const BatchOptions& opt) {
  Batch b;
  b.size = static_cast<int>(indices.size());
  b.visits = cohort.visits;
  b.dim = cohort.dim;
  b.subjects.assign(indices.begin(), indices.end());
  const int B = b.size, T = b.visits, D = b.dim;
  const bool need_fill = opt.fill != ImputeMode::Model;
  if (need_fill)
    for (auto s : kModalities)
      require(opt.fill_mean[idx(s)].size() == D, "make_batch: fill_mean required for fill strategies");

  b.x.assign(T, {Eigen::MatrixXd(B, D), Eigen::MatrixXd(B, D)});
  b.input_mask.assign(T, {Mask(B), Mask(B)});
  b.target_mask.assign(T, {Mask(B), Mask(B)});
  b.y.assign(T, Eigen::VectorXd(B));
  b.c.resize(B);
  if (need_fill) b.fill.assign(T, {Eigen::MatrixXd(B, D), Eigen::MatrixXd(B, D)});

  for (int row = 0; row < B; ++row) {
    const auto& r = cohort.subjects[indices[row]];
    b.c(row) = r.c;
    for (auto s : kModalities) {
      Mask visible(T);
      for (int t = 0; t < T; ++t) {
        bool in = r.present(s, t);
        if (opt.regime == InputRegime::BaselineOnly && t > 0) in = false;
        if (opt.drop_baseline_pet && s == Modality::Pet && t == 0) in = false;
        visible(t) = in;
        b.x[t][idx(s)].row(row) = r.features(s).row(t);
        b.input_mask[t][idx(s)](row) = in;
        b.target_mask[t][idx(s)](row) = r.present(s, t);
      }
      if (need_fill) {
        Eigen::MatrixXd f = fill_sequence(r.features(s), visible, opt.fill, opt.fill_mean[idx(s)]);
        for (int t = 0; t < T; ++t) b.fill[t][idx(s)].row(row) = f.row(t);
      }
    }
    for (int t = 0; t < T; ++t) b.y[t](row) = r.y(t);
  }
  return b;
}

}  // namespace mcnet
