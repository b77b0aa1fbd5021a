#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mcnet/core/errors.hpp"
#include "mcnet/core/tape.hpp"

namespace mcnet {

struct GradCheckOptions {
  double step = 1e-5;
  // Number of sampled coordinates; 0 checks every coordinate.
  int samples = 200;
  std::uint64_t seed = 0;
  // Floor added to the relative-error denominator.
  double eps = 1e-8;
  ParamFilter filter = all_params();
};

struct GradCheckResult {
  double max_rel_error = 0;
  std::string worst_param;
  Eigen::Index worst_index = -1;
  double worst_analytic = 0;
  double worst_numeric = 0;
  int checked = 0;
};

/// Builds a scalar loss on a fresh tape from the parameters in a store.
template <typename Scalar>
using LossBuilder = std::function<BasicVar<Scalar>(BasicTape<Scalar>&)>;

/// Compares reverse-mode gradients with central differences. Samples are
/// taken round-robin over the selected parameter entries so every entry is
/// visited before any is visited twice.
template <typename Scalar>
GradCheckResult finite_difference_check(BasicParameterStore<Scalar>& store, const LossBuilder<Scalar>& build,
                                        const GradCheckOptions& opt = {}) {
  if (!(opt.step > 0 && opt.step <= 1e-3)) throw ConfigError("gradcheck: step must lie in (0, 1e-3]");

  auto evaluate = [&]() {
    BasicTape<Scalar> tape;
    const Scalar v = build(tape).scalar();
    if (!std::isfinite(double(v))) throw NumericalError("gradcheck: non-finite loss");
    return v;
  };

  store.zero_grad();
  {
    BasicTape<Scalar> tape;
    auto loss = build(tape);
    if (!std::isfinite(double(loss.scalar()))) throw NumericalError("gradcheck: non-finite loss");
    tape.backward(loss);
  }

  std::vector<std::string> names;
  for (const auto& [n, e] : store)
    if (opt.filter(n) && e.value.size() > 0) names.push_back(n);
  if (names.empty()) return {};

  std::vector<std::pair<std::string, Eigen::Index>> coords;
  if (opt.samples <= 0) {
    for (const auto& n : names)
      for (Eigen::Index i = 0; i < store.at(n).value.size(); ++i) coords.emplace_back(n, i);
  } else {
    std::mt19937_64 rng(opt.seed);
    for (int s = 0; s < opt.samples; ++s) {
      const auto& n = names[s % names.size()];
      std::uniform_int_distribution<Eigen::Index> pick(0, store.at(n).value.size() - 1);
      coords.emplace_back(n, pick(rng));
    }
  }

  GradCheckResult res;
  for (const auto& [n, idx] : coords) {
    auto& e = store.at(n);
    Scalar& x = e.value.data()[idx];
    const Scalar orig = x;
    x = orig + Scalar(opt.step);
    const Scalar up = evaluate();
    x = orig - Scalar(opt.step);
    const Scalar down = evaluate();
    x = orig;
    const double numeric = double(up - down) / (2 * opt.step);
    const double analytic = double(e.grad.data()[idx]);
    const double rel = std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + opt.eps);
    ++res.checked;
    if (rel > res.max_rel_error || res.worst_index < 0) {
      res.max_rel_error = std::max(res.max_rel_error, rel);
      if (rel >= res.max_rel_error) {
        res.worst_param = n;
        res.worst_index = idx;
        res.worst_analytic = analytic;
        res.worst_numeric = numeric;
      }
    }
  }
  return res;
}

}  // namespace mcnet
