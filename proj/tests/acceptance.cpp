// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Training runs on the benchmark cohort are cached per seed and shared by the
// benchmark, robustness and attribution criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "benchmark.hpp"
#include "mcnet/core/gradcheck.hpp"
#include "mcnet/evaluation/evaluation.hpp"
#include "mcnet/training/model_io.hpp"
#include "oracles.hpp"

using namespace mcnet;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Shared benchmark runs

struct SeedRun {
  SynthCohort synth;
  Cohort cohort;
  std::vector<int> test;
  TrainResult result;
  std::string log;
  MetricsReport report;
  double train_seconds = 0;
};

std::map<std::uint64_t, std::unique_ptr<SeedRun>> g_runs;

SeedRun& seed_run(std::uint64_t seed) {
  auto& slot = g_runs[seed];
  if (slot) return *slot;
  const auto t0 = Clock::now();
  auto run = std::make_unique<SeedRun>();
  const TrainConfig tc = bench::train_config(seed);
  run->synth = generate_cohort(bench::cohort_config(seed));
  run->cohort = prepare_cohort(run->synth.cohort, tc.seed, tc.holdout);
  run->test = tc.holdout.indices(run->cohort.folds, {tc.holdout.test_fold});
  std::ostringstream log;
  run->result = train(run->cohort, tc, &log);
  run->log = log.str();
  run->report = evaluate(run->result.params, run->result.model, run->cohort, run->test, run->result.fill_mean);
  run->train_seconds = seconds_since(t0);
  std::fprintf(stderr, "  [seed %llu trained in %.1f s]\n", static_cast<unsigned long long>(seed), run->train_seconds);
  slot = std::move(run);
  return *slot;
}

constexpr int kBenchmarkSeeds = 5;
constexpr int kAttributionSeeds = 3;

// ---------------------------------------------------------------------------

Outcome gradient_check() {
  const auto t0 = Clock::now();
  const SynthCohort sc = generate_cohort(bench::cohort_config(11));
  const TrainConfig tc = bench::train_config(11);
  const Cohort cohort = prepare_cohort(sc.cohort, tc.seed, tc.holdout);
  std::vector<int> ids(24);
  std::iota(ids.begin(), ids.end(), 0);
  BatchOptions bo;
  bo.fill_mean = {Eigen::RowVectorXd::Zero(cohort.dim), Eigen::RowVectorXd::Zero(cohort.dim)};
  const Batch batch = make_batch(cohort, ids, bo);

  ModelConfig cfg = tc.effective_model();
  cfg.dim = cohort.dim;
  ParameterStore store = init_parameters(cfg, 11);
  StepPlan plan;
  plan.est = plan.adv = plan.cls = plan.pred = true;
  LossBuilder<double> f = [&](Tape& t) {
    const ParamAccess p{t, store, Track::Yes};
    return total_loss(compute_loss_terms(p, p, cfg, batch, plan), tc.weights);
  };
  GradCheckOptions opt;
  opt.samples = 200;
  opt.seed = 11;
  const GradCheckResult r = finite_difference_check(store, f, opt);

  std::set<std::string> namespaces;
  for (const auto& [n, e] : store) namespaces.insert(n.substr(0, n.find('.')));
  const double secs = seconds_since(t0);
  const bool covers = r.checked == 200 && std::distance(store.begin(), store.end()) <= 200;
  Outcome o;
  o.pass = covers && r.max_rel_error < 1e-4 && secs < 60;
  o.detail = fmt("max rel error %.2e over %.0f coords, ", r.max_rel_error, r.checked) +
             std::to_string(namespaces.size()) + " namespaces, worst " + r.worst_param + fmt(", %.1f s", secs);
  return o;
}

// Every masked row replaced by `value`.
Cohort fill_masked(Cohort c, double value) {
  for (auto& r : c.subjects)
    for (auto s : kModalities)
      for (int t = 0; t < c.visits; ++t)
        if (!r.present(s, t)) r.features(s).row(t).setConstant(value);
  return c;
}

struct Emitted {
  std::string log, checkpoint, reports;
  Eigen::VectorXd predictions;
};

Emitted emit(const Cohort& raw, TrainConfig tc) {
  const Cohort cohort = prepare_cohort(raw, tc.seed, tc.holdout);
  std::ostringstream log;
  TrainResult r = train(cohort, tc, &log);
  Emitted e;
  e.log = log.str();
  e.checkpoint = encode_checkpoint(model_checkpoint(r, cohort, tc));
  const auto test = tc.holdout.indices(cohort.folds, {tc.holdout.test_fold});
  for (const EvalOptions& opt : {EvalOptions{}, EvalOptions{true, false}, EvalOptions{false, true}})
    e.reports += to_json_line(evaluate(r.params, r.model, cohort, test, r.fill_mean, opt)) + "\n";
  std::vector<int> all(cohort.size());
  std::iota(all.begin(), all.end(), 0);
  BatchOptions bo;
  bo.fill = r.model.impute;
  bo.fill_mean = r.fill_mean;
  e.predictions = predict_conversion(r.params, r.model, cohort, all, bo);
  return e;
}

bool same(const Emitted& a, const Emitted& b) {
  return a.log == b.log && a.checkpoint == b.checkpoint && a.reports == b.reports &&
         a.predictions.size() == b.predictions.size() &&
         std::memcmp(a.predictions.data(), b.predictions.data(), sizeof(double) * a.predictions.size()) == 0;
}

Outcome mask_non_leakage() {
  const auto t0 = Clock::now();
  const Cohort raw = generate_cohort(bench::cohort_config(21)).cohort;
  TrainConfig tc = bench::train_config(21);
  tc.epochs_a = tc.epochs_b = tc.epochs_c = 3;
  tc.epochs_retrain = 2;
  const Emitted nan = emit(fill_masked(raw, std::numeric_limits<double>::quiet_NaN()), tc);
  const Emitted zero = emit(fill_masked(raw, 0.0), tc);
  const Emitted huge = emit(fill_masked(raw, 1e300), tc);
  TrainConfig di = tc;
  di.ablation.data_imputation = true;
  const bool di_same = same(emit(fill_masked(raw, std::numeric_limits<double>::quiet_NaN()), di),
                            emit(fill_masked(raw, -7.5), di));
  const double secs = seconds_since(t0);
  const bool equal = same(nan, zero) && same(nan, huge) && di_same;
  Outcome o;
  o.pass = equal && secs < 60;
  o.detail = std::string("logs, checkpoints, reports and predictions ") + (equal ? "identical" : "differ") +
             " across NaN/0/1e300 fills, incl. mean-fill variant" + fmt(", %.1f s", secs);
  return o;
}

Outcome equation_oracles() {
  int failed = 0, total = 0;
  std::string worst;
  for (const auto& c : oracle::equation_cases()) {
    ++total;
    const double err = c.error();
    if (!(err <= c.tolerance)) {
      ++failed;
      worst += " " + c.name + fmt("=%.2e", err);
    }
  }
  return {failed == 0, std::to_string(total - failed) + "/" + std::to_string(total) + " cases within tolerance" + worst};
}

Outcome invariants() {
  const double att = oracle::attention_row_violation(1000, 101);
  const double cell = oracle::cell_bound_violation(1000, 202);
  return {att <= 1e-12 && cell <= 1e-15, fmt("attention row error %.2e, cell bound violation %.2e", att, cell)};
}

Outcome imputation_benchmark() {
  std::vector<double> model, forward, linear;
  double secs = 0;
  for (int s = 0; s < kBenchmarkSeeds; ++s) {
    SeedRun& r = seed_run(s);
    const auto t0 = Clock::now();
    model.push_back(*r.report.imputation.mae[1]);
    forward.push_back(*fill_errors(r.cohort, r.test, ImputeMode::Forward, r.result.fill_mean).mae[1]);
    linear.push_back(*fill_errors(r.cohort, r.test, ImputeMode::Linear, r.result.fill_mean).mae[1]);
    secs += r.train_seconds + seconds_since(t0);
  }
  const double m = mean(model), f = mean(forward), l = mean(linear);
  return {m <= 0.9 * f && m <= 0.9 * l && secs < 600,
          fmt("PET MAE model %.4f, forward %.4f, linear %.4f", m, f, l) + fmt(" (%.0f s)", secs)};
}

Outcome prediction_benchmark() {
  std::vector<double> auc;
  for (int s = 0; s < kBenchmarkSeeds; ++s) auc.push_back(seed_run(s).report.auc);
  const double m = mean(auc);
  return {m >= 0.85, fmt("BL-only test AUC %.4f (min %.4f, max %.4f)", m, *std::min_element(auc.begin(), auc.end()),
                         *std::max_element(auc.begin(), auc.end()))};
}

Outcome ablation_ordering() {
  const std::vector<std::pair<std::string, Ablation>> variants{
      {"LC", {.longitudinal_classification = true}},
      {"CB", {.cross_attention = true}},
      {"DI", {.data_imputation = true}},
      {"AL", {.adversarial = true}},
  };
  std::vector<double> full_auc, full_mae;
  for (int s = 0; s < kBenchmarkSeeds; ++s) {
    full_auc.push_back(seed_run(s).report.auc);
    full_mae.push_back(*seed_run(s).report.imputation.mae[1]);
  }
  const double fa = mean(full_auc), fm = mean(full_mae);
  bool pass = true;
  std::string detail = fmt("full AUC %.4f", fa);
  for (const auto& [name, ab] : variants) {
    std::vector<double> auc, mae;
    for (int s = 0; s < kBenchmarkSeeds; ++s) {
      SeedRun& r = seed_run(s);
      TrainConfig tc = bench::train_config(s);
      tc.ablation = ab;
      TrainResult v = train(r.cohort, tc);
      const MetricsReport rep = evaluate(v.params, v.model, r.cohort, r.test, v.fill_mean);
      auc.push_back(rep.auc);
      if (rep.imputation.mae[1]) mae.push_back(*rep.imputation.mae[1]);
    }
    const double va = mean(auc);
    pass = pass && fa >= va;
    detail += ", w/o " + name + fmt(" %.4f", va);
    if (name == "AL") {
      const double vm = mean(mae);
      pass = pass && vm >= fm;
      detail += fmt(" (PET MAE %.4f vs full %.4f)", vm, fm);
    }
  }
  return {pass, detail};
}

Outcome mri_only_robustness() {
  std::vector<double> drop;
  for (int s = 0; s < kBenchmarkSeeds; ++s) {
    SeedRun& r = seed_run(s);
    const MetricsReport m =
        evaluate(r.result.params, r.result.model, r.cohort, r.test, r.result.fill_mean, {false, true});
    drop.push_back(r.report.auc - m.auc);
  }
  const double d = mean(drop);
  return {d <= 0.05, fmt("mean AUC drop %.4f", d)};
}

Outcome attribution_sanity() {
  std::array<std::vector<double>, 2> hits;
  for (int s = 0; s < kAttributionSeeds; ++s) {
    SeedRun& r = seed_run(s);
    std::vector<int> all(r.cohort.size());
    std::iota(all.begin(), all.end(), 0);
    const Attribution a = attribute_rois(r.result.params, r.result.model, r.cohort, all, 2, r.result.fill_mean);
    for (auto m : kModalities) {
      const auto& truth = r.synth.severity_features[idx(m)];
      const std::set<int> want(truth.begin(), truth.end());
      int n = 0;
      for (const auto& top : a.top[idx(m)]) n += std::set<int>(top.begin(), top.end()) == want;
      hits[idx(m)].push_back(n);
    }
  }
  const double mri = mean(hits[0]), pet = mean(hits[1]);
  return {mri >= 4 && pet >= 4, fmt("visits with top-2 = severity set: MRI %.2f, PET %.2f of 5", mri, pet)};
}

Outcome determinism() {
  SeedRun& first = seed_run(0);
  const TrainConfig tc = bench::train_config(0);
  const Cohort cohort = prepare_cohort(generate_cohort(bench::cohort_config(0)).cohort, tc.seed, tc.holdout);
  std::ostringstream log;
  TrainResult second = train(cohort, tc, &log);
  const MetricsReport rep = evaluate(second.params, second.model, cohort, first.test, second.fill_mean);
  const bool ckpt = encode_checkpoint(model_checkpoint(first.result, first.cohort, tc)) ==
                    encode_checkpoint(model_checkpoint(second, cohort, tc));
  const bool report = to_json_line(first.report) == to_json_line(rep);
  const bool logs = first.log == log.str();
  return {ckpt && report && logs, std::string("checkpoint ") + (ckpt ? "identical" : "differs") + ", report " +
                                      (report ? "identical" : "differs") + ", log " + (logs ? "identical" : "differs")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient check of the total loss", gradient_check},
      {"masked entries never leak", mask_non_leakage},
      {"equation oracles", equation_oracles},
      {"attention and cell invariants", invariants},
      {"imputation benchmark", imputation_benchmark},
      {"prediction benchmark", prediction_benchmark},
      {"ablation ordering", ablation_ordering},
      {"MRI-only baseline robustness", mri_only_robustness},
      {"attribution sanity", attribution_sanity},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %zu: %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
