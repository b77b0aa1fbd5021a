#include "mcnet/training/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "mcnet/core/errors.hpp"
#include "mcnet/evaluation/metrics.hpp"

namespace mcnet {

void LossWeights::validate() const {
  if (!(lambda >= 0) || !(zeta >= 0) || !(xi >= 0)) throw ConfigError("loss weights must be >= 0");
}

double total_loss(double est, double adv, double cls, double pred, const LossWeights& w) {
  w.validate();
  return w.lambda * est + w.zeta * adv + w.xi * (cls + pred);
}

std::string Ablation::to_string() const {
  std::string s;
  auto add = [&](bool on, const char* tag) {
    if (!on) return;
    if (!s.empty()) s += ",";
    s += tag;
  };
  add(longitudinal_classification, "LC");
  add(cross_attention, "CB");
  add(data_imputation, "DI");
  add(adversarial, "AL");
  return s.empty() ? "none" : s;
}

Ablation Ablation::parse(const std::string& csv) {
  Ablation a;
  if (csv.empty() || csv == "none") return a;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "LC") a.longitudinal_classification = true;
    else if (tok == "CB") a.cross_attention = true;
    else if (tok == "DI") a.data_imputation = true;
    else if (tok == "AL") a.adversarial = true;
    else throw ConfigError("unknown ablation axis '" + tok + "' (expected LC, CB, DI, AL)");
  }
  return a;
}

std::string to_string(Stage s) {
  switch (s) {
    case Stage::A: return "A";
    case Stage::B: return "B";
    case Stage::C: return "C";
    case Stage::Retrain: return "retrain";
  }
  return "A";
}

Stage stage_from_string(const std::string& s) {
  if (s == "A" || s == "a") return Stage::A;
  if (s == "B" || s == "b") return Stage::B;
  if (s == "C" || s == "c") return Stage::C;
  if (s == "retrain") return Stage::Retrain;
  throw ConfigError("unknown stage '" + s + "' (expected A, B, C, retrain)");
}

void TrainConfig::validate() const {
  weights.validate();
  adam.validate();
  effective_model().validate();
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs_a < 0 || epochs_b < 0 || epochs_c < 0 || epochs_retrain < 0) throw ConfigError("epochs must be >= 0");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (holdout.test_fold == holdout.validation_fold) throw ConfigError("test and validation folds must differ");
}

ModelConfig TrainConfig::effective_model() const {
  ModelConfig m = model;
  if (ablation.cross_attention) m.cross_attention = false;
  m.impute = ablation.data_imputation ? ImputeMode::Mean : fill;
  return m;
}

namespace {

Var zero_scalar(Tape& tape) { return tape.constant(Eigen::MatrixXd::Zero(1, 1)); }

bool finite(const LossBreakdown& b) {
  return std::isfinite(b.est) && std::isfinite(b.adv) && std::isfinite(b.cls) && std::isfinite(b.pred) &&
         std::isfinite(b.disc) && std::isfinite(b.total);
}

}  // namespace

LossTerms compute_loss_terms(const ParamAccess& p, const ParamAccess& disc_access, const ModelConfig& cfg,
                             const Batch& batch, const StepPlan& plan) {
  Tape& tape = p.tape;
  LossTerms lt;
  const RolloutOptions ro{cfg.impute, false};
  if (plan.heads) lt.output = forward(p, cfg, batch, ro);
  else lt.output.trace = rollout(p, cfg, batch, ro);
  const RolloutTrace& tr = lt.output.trace;

  // L_est per (subject, visit, modality) entry, the unit L_adv averages over.
  lt.est = plan.est ? double(batch.dim) * estimation_loss(tr, batch) : zero_scalar(tape);
  lt.adv = plan.adv ? adversarial_loss(discriminate_trace(disc_access, cfg, tr, batch, false)) : zero_scalar(tape);
  if (plan.cls) {
    require(plan.heads, "compute_loss_terms: L_cls needs the prediction module");
    std::vector<Mask> mri;
    for (const auto& m : batch.target_mask) mri.push_back(m[idx(Modality::Mri)]);
    lt.cls = cls_loss(lt.output.change_probs, batch.y, mri);
  } else {
    lt.cls = zero_scalar(tape);
  }
  if (plan.pred) {
    require(plan.heads, "compute_loss_terms: L_pred needs the prediction module");
    lt.pred = focal_loss(lt.output.conversion_probs, batch.c, cfg.focal_mu, cfg.focal_gamma);
  } else {
    lt.pred = zero_scalar(tape);
  }
  return lt;
}

Var total_loss(const LossTerms& t, const LossWeights& w) {
  w.validate();
  return w.lambda * t.est + w.zeta * t.adv + w.xi * (t.cls + t.pred);
}

LossBreakdown alternate_update(ParameterStore& params, const ModelConfig& cfg, const Batch& batch,
                               const StepPlan& plan, const TrainConfig& tc, StepCounters& counters) {
  const ParamFilter disc = discriminator_params();
  const ParamFilter trainable = plan.trainable;
  const bool update_disc = plan.update_discriminator;
  Tape tape;
  tape.freeze([&](const std::string& n) { return !trainable(n) && !(update_disc && disc(n)); });
  const ParamAccess p{tape, params, Track::Yes};

  LossBreakdown out;
  // One generator pass serves both phases; L_adv is built after the
  // discriminator moved.
  StepPlan main_plan = plan;
  main_plan.adv = false;
  LossTerms terms = compute_loss_terms(p, p.with(Track::No), cfg, batch, main_plan);
  const RolloutTrace& trace = terms.output.trace;

  if (update_disc) {
    Var ld = discriminator_loss(discriminate_trace(p, cfg, trace, batch, true));
    out.disc = ld.scalar();
    if (!std::isfinite(out.disc)) throw NumericalError("discriminator loss is not finite");
    params.zero_grad();
    tape.backward(ld);
    adam_step(params, tc.adam, ++counters.discriminator, disc);
  }
  if (plan.adv)
    terms.adv = adversarial_loss(discriminate_trace(p.with(Track::No), cfg, trace, batch, false));

  Var total = total_loss(terms, tc.weights);
  out.est = terms.est.scalar();
  out.adv = terms.adv.scalar();
  out.cls = terms.cls.scalar();
  out.pred = terms.pred.scalar();
  out.total = total.scalar();
  if (!finite(out)) {
    std::ostringstream msg;
    msg << "non-finite loss (est=" << out.est << " adv=" << out.adv << " cls=" << out.cls << " pred=" << out.pred
        << " disc=" << out.disc << ")";
    throw NumericalError(msg.str());
  }
  params.zero_grad();
  tape.backward(total);
  adam_step(params, tc.adam, ++counters.generator, trainable);
  params.zero_grad();
  return out;
}

std::string to_json_line(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["stage"] = to_string(r.stage);
  j["epoch"] = r.epoch;
  j["est"] = r.loss.est;
  j["adv"] = r.loss.adv;
  j["cls"] = r.loss.cls;
  j["pred"] = r.loss.pred;
  j["disc"] = r.loss.disc;
  j["total"] = r.loss.total;
  j["val_auc"] = r.val_auc ? nlohmann::ordered_json(*r.val_auc) : nlohmann::ordered_json(nullptr);
  j["val_mae"] = r.val_mae ? nlohmann::ordered_json(*r.val_mae) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

Cohort prepare_cohort(const Cohort& raw, std::uint64_t seed, const HoldOut& holdout) {
  Cohort c = raw;
  c.folds = split_stratified(raw, seed);
  return normalize(c, holdout.training_folds());
}

Eigen::VectorXd predict_conversion(ParameterStore& params, const ModelConfig& cfg, const Cohort& cohort,
                                   std::span<const int> indices, const BatchOptions& opt) {
  if (indices.empty()) return {};
  const Batch batch = make_batch(cohort, indices, opt);
  Tape tape;
  const ParamAccess p{tape, params, Track::No};
  const ModelOutput out = forward(p, cfg, batch, {cfg.impute, false});
  return out.conversion_probs.value().col(1);
}

double estimation_error(ParameterStore& params, const ModelConfig& cfg, const Cohort& cohort,
                        std::span<const int> indices, const BatchOptions& opt) {
  require(!indices.empty(), "estimation_error: no subjects");
  const Batch batch = make_batch(cohort, indices, opt);
  Tape tape;
  const ParamAccess p{tape, params, Track::No};
  return estimation_loss(rollout(p, cfg, batch, {cfg.impute, false}), batch).scalar();
}

namespace {

struct StageRunner {
  const Cohort& cohort;
  const TrainConfig& tc;
  const ModelConfig& cfg;
  ParameterStore& params;
  std::vector<int> train_idx, val_idx;
  std::array<Eigen::RowVectorXd, 2> fill_mean;
  std::mt19937_64 rng;
  std::vector<EpochRecord>& log;
  std::ostream* log_stream;

  BatchOptions options(InputRegime regime) const {
    BatchOptions o;
    o.regime = regime;
    o.fill = cfg.impute;
    o.fill_mean = fill_mean;
    return o;
  }

  std::optional<double> val_auc() {
    if (val_idx.empty()) return std::nullopt;
    const Eigen::VectorXd s = predict_conversion(params, cfg, cohort, val_idx, options(InputRegime::BaselineOnly));
    Eigen::VectorXi y(val_idx.size());
    for (std::size_t i = 0; i < val_idx.size(); ++i) y(i) = cohort.subjects[val_idx[i]].c;
    try {
      return auc(s, y);
    } catch (const UndefinedMetric&) {
      return std::nullopt;
    }
  }

  std::optional<double> val_mae() {
    if (val_idx.empty()) return std::nullopt;
    return estimation_error(params, cfg, cohort, val_idx, options(InputRegime::BaselineOnly));
  }

  void run(Stage stage, int epochs, const StepPlan& plan, InputRegime regime, bool select_on_mae) {
    if (epochs == 0) return;
    params.reset_moments();
    StepCounters counters;
    ParameterStore best = params;
    double best_score = -std::numeric_limits<double>::infinity();
    int since_best = 0;
    const BatchOptions opt = options(regime);

    for (int epoch = 1; epoch <= epochs; ++epoch) {
      std::vector<int> order = train_idx;
      std::shuffle(order.begin(), order.end(), rng);
      LossBreakdown mean;
      int batches = 0;
      for (std::size_t start = 0; start < order.size(); start += std::size_t(tc.batch_size)) {
        const std::size_t n = std::min<std::size_t>(std::size_t(tc.batch_size), order.size() - start);
        const Batch batch = make_batch(cohort, std::span<const int>(order).subspan(start, n), opt);
        const LossBreakdown b = alternate_update(params, cfg, batch, plan, tc, counters);
        mean.est += b.est;
        mean.adv += b.adv;
        mean.cls += b.cls;
        mean.pred += b.pred;
        mean.disc += b.disc;
        mean.total += b.total;
        ++batches;
      }
      for (double* v : {&mean.est, &mean.adv, &mean.cls, &mean.pred, &mean.disc, &mean.total}) *v /= batches;

      EpochRecord rec{stage, epoch, mean, std::nullopt, std::nullopt};
      if (select_on_mae) rec.val_mae = val_mae();
      else rec.val_auc = val_auc();
      log.push_back(rec);
      if (log_stream) *log_stream << to_json_line(rec) << '\n';

      const std::optional<double> score = select_on_mae ? (rec.val_mae ? std::optional(-*rec.val_mae) : std::nullopt)
                                                        : rec.val_auc;
      if (!score) {
        best = params;
        continue;
      }
      if (*score > best_score) {
        best_score = *score;
        best = params;
        since_best = 0;
      } else if (++since_best >= tc.patience) {
        break;
      }
    }
    params = best;
    params.reset_moments();
  }
};

}  // namespace

TrainResult train(const Cohort& cohort, const TrainConfig& config, std::ostream* log) {
  config.validate();
  require(!cohort.folds.empty() && cohort.folds.size() == cohort.size(), "train: cohort has no split assignment");
  if (cohort.norm.empty()) throw ContractViolation("train: cohort is not normalised");

  TrainResult result;
  result.model = config.effective_model();
  result.model.dim = cohort.dim;
  result.model.visits = cohort.visits;
  const ModelConfig& cfg = result.model;
  cfg.validate();

  const auto& ho = config.holdout;
  std::vector<int> train_idx = ho.indices(cohort.folds, ho.training_folds());
  if (train_idx.empty()) throw SplitError("train: training folds are empty");
  std::vector<int> val_idx = ho.indices(cohort.folds, {ho.validation_fold});
  result.fill_mean = present_mean(cohort, train_idx);

  result.params = init_parameters(cfg, config.seed);
  StageRunner runner{cohort,   config,  cfg, result.params, train_idx, val_idx, result.fill_mean,
                     std::mt19937_64(config.seed ^ 0x9e3779b97f4a7c15ULL), result.log, log};

  const Ablation& ab = config.ablation;
  const bool model_impute = cfg.impute == ImputeMode::Model;
  const bool adversarial = model_impute && !ab.adversarial;
  const ParamFilter gen = generator_params(), pred = prediction_params();

  for (Stage stage : config.stages) {
    StepPlan plan;
    switch (stage) {
      case Stage::A:
        if (!model_impute) break;
        plan.est = true;
        plan.adv = adversarial;
        plan.update_discriminator = adversarial;
        plan.heads = false;
        plan.trainable = gen;
        runner.run(stage, config.epochs_a, plan, InputRegime::All, true);
        break;
      case Stage::B:
        plan.cls = !ab.longitudinal_classification;
        plan.pred = true;
        plan.trainable = pred;
        runner.run(stage, config.epochs_b, plan, InputRegime::All, false);
        break;
      case Stage::C:
      case Stage::Retrain: {
        const int epochs = stage == Stage::C ? config.epochs_c : config.epochs_retrain;
        if (stage == Stage::Retrain && epochs > 0 && config.cold_restart)
          result.params = init_parameters(cfg, config.seed);
        plan.est = model_impute;
        plan.adv = adversarial;
        plan.update_discriminator = adversarial;
        plan.cls = !ab.longitudinal_classification;
        plan.pred = true;
        plan.trainable = [gen, pred](const std::string& n) { return gen(n) || pred(n); };
        runner.run(stage, epochs, plan, InputRegime::BaselineOnly, false);
        break;
      }
    }
  }
  return result;
}

}  // namespace mcnet
