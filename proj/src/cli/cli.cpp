#include "mcnet/cli/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "mcnet/core/errors.hpp"
#include "mcnet/data/synth.hpp"
#include "mcnet/evaluation/evaluation.hpp"
#include "mcnet/training/config_file.hpp"
#include "mcnet/training/model_io.hpp"

namespace mcnet {
namespace {

namespace fs = std::filesystem;

struct Invocation {
  std::string config;
  std::string cohort;
  std::string checkpoint;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  bool bl_only = false;
  bool mri_only = false;
  std::string stage;
  std::string ablate = "LC,CB,DI,AL";
  int top_k = 10;
  std::string head = "longitudinal";
};

RunConfig run_config(const Invocation& inv) {
  RunConfig rc;
  if (!inv.config.empty()) rc = apply_key_values(load_key_values(inv.config));
  if (inv.seed) rc.synth.seed = rc.train.seed = *inv.seed;
  if (!inv.stage.empty()) {
    KeyValues kv{{"stages", inv.stage}};
    rc = apply_key_values(kv, rc);
  }
  return rc;
}

fs::path out_dir(const Invocation& inv) {
  fs::path dir(inv.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + inv.out + "': " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

void need(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string("missing required flag ") + flag);
}

void check_finite(const MetricsReport& r) {
  bool ok = std::isfinite(r.acc) && std::isfinite(r.auc) && std::isfinite(r.bac);
  for (int s = 0; s < 2; ++s) {
    if (r.imputation.mae[s]) ok = ok && std::isfinite(*r.imputation.mae[s]);
    if (r.imputation.rmse[s]) ok = ok && std::isfinite(*r.imputation.rmse[s]);
  }
  if (!ok) throw NumericalError("report for '" + r.variant + "' contains non-finite values");
}

std::string json_lines(std::span<const MetricsReport> reports) {
  std::string s;
  for (const auto& r : reports) s += to_json_line(r) + "\n";
  return s;
}

void cmd_generate(const Invocation& inv, std::ostream& out) {
  const RunConfig rc = run_config(inv);
  const SynthCohort sc = generate_cohort(rc.synth);
  const fs::path dir = out_dir(inv);
  save_cohort((dir / "cohort.csv").string(), sc.cohort);
  KeyValues truth;
  for (auto s : kModalities) {
    std::string list;
    for (int j : sc.severity_features[idx(s)]) list += (list.empty() ? "" : ",") + std::to_string(j);
    truth["severity_features." + std::string(modality_name(s))] = list;
  }
  write_text(dir / "truth.txt", format_key_values(truth));
  out << "wrote " << (dir / "cohort.csv").string() << " (" << sc.cohort.size() << " subjects)\n";
}

void cmd_train(const Invocation& inv, std::ostream& out) {
  need(inv.cohort, "--cohort");
  const RunConfig rc = run_config(inv);
  const Cohort raw = load_cohort(inv.cohort, rc.train.model.visits);
  const Cohort cohort = prepare_cohort(raw, rc.train.seed, rc.train.holdout);
  const fs::path dir = out_dir(inv);
  std::ofstream log(dir / "train_log.jsonl", std::ios::binary);
  if (!log) throw IoError("cannot open training log for writing");
  const TrainResult result = train(cohort, rc.train, &log);
  write_checkpoint((dir / "model.ckpt").string(), model_checkpoint(result, cohort, rc.train));
  write_text(dir / "config.txt", format_key_values(to_key_values(rc)));
  out << "wrote " << (dir / "model.ckpt").string() << " after " << result.log.size() << " epochs\n";
}

void cmd_evaluate(const Invocation& inv, std::ostream& out) {
  need(inv.cohort, "--cohort");
  need(inv.checkpoint, "--checkpoint");
  LoadedModel m = load_model(read_checkpoint(inv.checkpoint));
  const Cohort cohort = prepare_for(m, load_cohort(inv.cohort, m.model.visits));
  const auto test = m.holdout.indices(cohort.folds, {m.holdout.test_fold});
  MetricsReport r = evaluate(m.params, m.model, cohort, test, m.fill_mean, {inv.bl_only, inv.mri_only});
  r.variant = inv.mri_only ? "mri-only" : "full";
  check_finite(r);
  const fs::path dir = out_dir(inv);
  const std::vector<MetricsReport> reports{r};
  write_text(dir / "report.jsonl", json_lines(reports));
  write_text(dir / "report.txt", format_table(reports));
  out << format_table(reports);
}

void cmd_impute(const Invocation& inv, std::ostream& out) {
  need(inv.cohort, "--cohort");
  need(inv.checkpoint, "--checkpoint");
  LoadedModel m = load_model(read_checkpoint(inv.checkpoint));
  const Cohort raw = load_cohort(inv.cohort, m.model.visits);
  const Cohort cohort = prepare_for(m, raw);
  std::vector<int> all(cohort.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);

  BatchOptions bo;
  bo.fill = m.model.impute;
  bo.fill_mean = m.fill_mean;
  const Batch batch = make_batch(cohort, all, bo);
  Tape tape;
  const RolloutTrace tr = rollout(ParamAccess{tape, m.params, Track::No}, m.model, batch, {m.model.impute, false});

  Cohort result = raw;
  ProvenanceTable prov(raw.size(), std::vector<std::array<Provenance, 2>>(raw.visits));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto& r = result.subjects[i];
    for (int t = 0; t < raw.visits; ++t) {
      for (auto s : kModalities) {
        auto& p = prov[i][t][idx(s)];
        if (r.present(s, t)) {
          p = Provenance::Observed;
          continue;
        }
        p = s == Modality::Mri ? Provenance::ImputedLg : (t == 0 ? Provenance::ImputedCs : Provenance::ImputedMixed);
        const Eigen::RowVectorXd z = tr.u[t][idx(s)].value().row(static_cast<Eigen::Index>(i));
        r.features(s).row(t) = (z.array() * m.norm.sd[idx(s)].array() + m.norm.mean[idx(s)].array()).matrix();
      }
    }
  }
  const fs::path dir = out_dir(inv);
  save_cohort((dir / "imputed.csv").string(), result, &prov);
  out << "wrote " << (dir / "imputed.csv").string() << "\n";
}

void cmd_attribute(const Invocation& inv, std::ostream& out) {
  need(inv.cohort, "--cohort");
  need(inv.checkpoint, "--checkpoint");
  AttributionHead head;
  if (inv.head == "longitudinal") head = AttributionHead::Longitudinal;
  else if (inv.head == "conversion") head = AttributionHead::Conversion;
  else throw ConfigError("unknown head '" + inv.head + "' (expected longitudinal or conversion)");
  LoadedModel m = load_model(read_checkpoint(inv.checkpoint));
  const Cohort cohort = prepare_for(m, load_cohort(inv.cohort, m.model.visits));
  std::vector<int> all(cohort.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  const Attribution a = attribute_rois(m.params, m.model, cohort, all, inv.top_k, m.fill_mean, head);
  for (const auto& w : a.warnings) out << "warning: " << w << "\n";
  const fs::path dir = out_dir(inv);
  write_text(dir / "attribution.txt", format_attribution(a));
  out << format_attribution(a);
}

void cmd_ablate(const Invocation& inv, std::ostream& out) {
  need(inv.cohort, "--cohort");
  const RunConfig rc = run_config(inv);
  const Cohort cohort = prepare_cohort(load_cohort(inv.cohort, rc.train.model.visits), rc.train.seed, rc.train.holdout);
  const auto reports = run_ablation(cohort, rc.train, Ablation::parse(inv.ablate), {inv.bl_only, inv.mri_only});
  for (const auto& r : reports) check_finite(r);
  const fs::path dir = out_dir(inv);
  write_text(dir / "ablation.jsonl", json_lines(reports));
  write_text(dir / "ablation.txt", format_table(reports));
  out << format_table(reports);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"MCI conversion prediction with multi-view imputation"};
  app.require_subcommand(1);
  Invocation inv;

  auto common = [&](CLI::App* c) {
    c->add_option("--config", inv.config, "key=value configuration file");
    c->add_option("--out", inv.out, "output directory");
    c->add_option("--seed", inv.seed, "seed override for generation and splitting");
  };
  auto* gen = app.add_subcommand("generate", "write a synthetic cohort");
  common(gen);
  auto* tr = app.add_subcommand("train", "train a model and write a checkpoint");
  common(tr);
  tr->add_option("--cohort", inv.cohort, "cohort CSV")->required();
  tr->add_option("--stage", inv.stage, "stages to run, e.g. A,B,C");
  auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint on the test fold");
  ev->add_option("--cohort", inv.cohort)->required();
  ev->add_option("--checkpoint", inv.checkpoint)->required();
  ev->add_option("--out", inv.out);
  ev->add_flag("--bl-only", inv.bl_only, "read baseline rows only");
  ev->add_flag("--mri-only", inv.mri_only, "withhold baseline PET");
  auto* im = app.add_subcommand("impute", "fill masked rows with model estimates");
  im->add_option("--cohort", inv.cohort)->required();
  im->add_option("--checkpoint", inv.checkpoint)->required();
  im->add_option("--out", inv.out);
  auto* at = app.add_subcommand("attribute", "rank features by input gradient");
  at->add_option("--cohort", inv.cohort)->required();
  at->add_option("--checkpoint", inv.checkpoint)->required();
  at->add_option("--out", inv.out);
  at->add_option("-k,--top", inv.top_k, "features per modality and visit");
  at->add_option("--head", inv.head, "longitudinal or conversion");
  auto* ab = app.add_subcommand("ablate", "train and compare ablated variants");
  common(ab);
  ab->add_option("--cohort", inv.cohort)->required();
  ab->add_option("--ablate", inv.ablate, "comma-separated axes from LC,CB,DI,AL");
  ab->add_flag("--bl-only", inv.bl_only);
  ab->add_flag("--mri-only", inv.mri_only);

  std::vector<std::string> argv_storage{"mcnet"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: usage: " << msg << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) cmd_generate(inv, out);
    else if (tr->parsed()) cmd_train(inv, out);
    else if (ev->parsed()) cmd_evaluate(inv, out);
    else if (im->parsed()) cmd_impute(inv, out);
    else if (at->parsed()) cmd_attribute(inv, out);
    else if (ab->parsed()) cmd_ablate(inv, out);
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << e.kind() << ": " << msg << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mcnet
