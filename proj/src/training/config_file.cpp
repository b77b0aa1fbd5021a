#include "mcnet/training/config_file.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "mcnet/core/errors.hpp"

namespace mcnet {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config: bad value '" + v + "' for key '" + key + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad boolean '" + v + "' for key '" + key + "'");
}

std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::vector<Stage> parse_stages(const std::string& v) {
  std::vector<Stage> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(stage_from_string(trim(tok)));
  if (out.empty()) throw ConfigError("config: stages must not be empty");
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  auto i = [](auto member) {
    return Setter([member](RunConfig& c, const std::string& k, const std::string& v) {
      member(c) = parse_number<int>(k, v);
    });
  };
  auto d = [](auto member) {
    return Setter([member](RunConfig& c, const std::string& k, const std::string& v) {
      member(c) = parse_number<double>(k, v);
    });
  };
  auto b = [](auto member) {
    return Setter([member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_bool(k, v); });
  };
  static const std::map<std::string, Setter> table = {
      // shared
      {"dim", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.synth.d = c.train.model.dim = parse_number<int>(k, v);
       }},
      {"visits", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.synth.t = c.train.model.visits = parse_number<int>(k, v);
       }},
      {"seed", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.synth.seed = c.train.seed = parse_number<std::uint64_t>(k, v);
       }},
      // generator
      {"n_subjects", i([](RunConfig& c) -> int& { return c.synth.n_subjects; })},
      {"p_pet_bl_missing", d([](RunConfig& c) -> double& { return c.synth.p_pet_bl_missing; })},
      {"p_mri_missing", d([](RunConfig& c) -> double& { return c.synth.p_mri_missing; })},
      {"p_pet_missing", d([](RunConfig& c) -> double& { return c.synth.p_pet_missing; })},
      {"attrition", d([](RunConfig& c) -> double& { return c.synth.attrition; })},
      {"noise_sd", d([](RunConfig& c) -> double& { return c.synth.noise_sd; })},
      {"class_balance", d([](RunConfig& c) -> double& { return c.synth.class_balance; })},
      {"severity_features", i([](RunConfig& c) -> int& { return c.synth.severity_features; })},
      // model
      {"hidden", i([](RunConfig& c) -> int& { return c.train.model.hidden; })},
      {"layers", i([](RunConfig& c) -> int& { return c.train.model.layers; })},
      {"heads", i([](RunConfig& c) -> int& { return c.train.model.heads; })},
      {"temporal_heads", i([](RunConfig& c) -> int& { return c.train.model.temporal_heads; })},
      {"disc_hidden1", i([](RunConfig& c) -> int& { return c.train.model.disc_hidden1; })},
      {"disc_hidden2", i([](RunConfig& c) -> int& { return c.train.model.disc_hidden2; })},
      {"per_modality_discriminator", b([](RunConfig& c) -> bool& { return c.train.model.per_modality_discriminator; })},
      {"cross_attention", b([](RunConfig& c) -> bool& { return c.train.model.cross_attention; })},
      {"reduction", [](RunConfig& c, const std::string&, const std::string& v) {
         c.train.model.reduction = head_reduction_from_string(v);
       }},
      {"focal_mu", d([](RunConfig& c) -> double& { return c.train.model.focal_mu; })},
      {"focal_gamma", d([](RunConfig& c) -> double& { return c.train.model.focal_gamma; })},
      // training
      {"lambda", d([](RunConfig& c) -> double& { return c.train.weights.lambda; })},
      {"zeta", d([](RunConfig& c) -> double& { return c.train.weights.zeta; })},
      {"xi", d([](RunConfig& c) -> double& { return c.train.weights.xi; })},
      {"lr", d([](RunConfig& c) -> double& { return c.train.adam.lr; })},
      {"weight_decay", d([](RunConfig& c) -> double& { return c.train.adam.weight_decay; })},
      {"beta1", d([](RunConfig& c) -> double& { return c.train.adam.beta1; })},
      {"beta2", d([](RunConfig& c) -> double& { return c.train.adam.beta2; })},
      {"eps", d([](RunConfig& c) -> double& { return c.train.adam.eps; })},
      {"batch_size", i([](RunConfig& c) -> int& { return c.train.batch_size; })},
      {"epochs_a", i([](RunConfig& c) -> int& { return c.train.epochs_a; })},
      {"epochs_b", i([](RunConfig& c) -> int& { return c.train.epochs_b; })},
      {"epochs_c", i([](RunConfig& c) -> int& { return c.train.epochs_c; })},
      {"epochs_retrain", i([](RunConfig& c) -> int& { return c.train.epochs_retrain; })},
      {"patience", i([](RunConfig& c) -> int& { return c.train.patience; })},
      {"stages", [](RunConfig& c, const std::string&, const std::string& v) { c.train.stages = parse_stages(v); }},
      {"cold_restart", b([](RunConfig& c) -> bool& { return c.train.cold_restart; })},
      {"fill", [](RunConfig& c, const std::string&, const std::string& v) {
         c.train.fill = impute_mode_from_string(v);
       }},
      {"ablate", [](RunConfig& c, const std::string&, const std::string& v) { c.train.ablation = Ablation::parse(v); }},
      {"test_fold", i([](RunConfig& c) -> int& { return c.train.holdout.test_fold; })},
      {"validation_fold", i([](RunConfig& c) -> int& { return c.train.holdout.validation_fold; })},
  };
  return table;
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
    if (key.empty()) throw ParseError("config line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second)
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return kv;
}

KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return parse_key_values(in);
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

RunConfig apply_key_values(const KeyValues& kv, RunConfig base) {
  const auto& table = setters();
  for (const auto& [k, v] : kv) {
    const auto it = table.find(k);
    if (it == table.end()) throw ConfigError("config: unknown key '" + k + "'");
    it->second(base, k, v);
  }
  return base;
}

KeyValues to_key_values(const RunConfig& c) {
  KeyValues kv = model_key_values(c.train.model);
  kv.erase("impute");  // derived from fill and ablate
  const auto& s = c.synth;
  const auto& t = c.train;
  kv["seed"] = std::to_string(t.seed);
  kv["n_subjects"] = std::to_string(s.n_subjects);
  kv["p_pet_bl_missing"] = format_double(s.p_pet_bl_missing);
  kv["p_mri_missing"] = format_double(s.p_mri_missing);
  kv["p_pet_missing"] = format_double(s.p_pet_missing);
  kv["attrition"] = format_double(s.attrition);
  kv["noise_sd"] = format_double(s.noise_sd);
  kv["class_balance"] = format_double(s.class_balance);
  kv["severity_features"] = std::to_string(s.severity_features);
  kv["lambda"] = format_double(t.weights.lambda);
  kv["zeta"] = format_double(t.weights.zeta);
  kv["xi"] = format_double(t.weights.xi);
  kv["lr"] = format_double(t.adam.lr);
  kv["weight_decay"] = format_double(t.adam.weight_decay);
  kv["beta1"] = format_double(t.adam.beta1);
  kv["beta2"] = format_double(t.adam.beta2);
  kv["eps"] = format_double(t.adam.eps);
  kv["batch_size"] = std::to_string(t.batch_size);
  kv["epochs_a"] = std::to_string(t.epochs_a);
  kv["epochs_b"] = std::to_string(t.epochs_b);
  kv["epochs_c"] = std::to_string(t.epochs_c);
  kv["epochs_retrain"] = std::to_string(t.epochs_retrain);
  kv["patience"] = std::to_string(t.patience);
  std::string stages;
  for (Stage st : t.stages) stages += (stages.empty() ? "" : ",") + to_string(st);
  kv["stages"] = stages;
  kv["cold_restart"] = t.cold_restart ? "true" : "false";
  kv["fill"] = to_string(t.fill);
  kv["ablate"] = t.ablation.to_string();
  kv["test_fold"] = std::to_string(t.holdout.test_fold);
  kv["validation_fold"] = std::to_string(t.holdout.validation_fold);
  return kv;
}

KeyValues model_key_values(const ModelConfig& m) {
  KeyValues kv;
  kv["dim"] = std::to_string(m.dim);
  kv["visits"] = std::to_string(m.visits);
  kv["hidden"] = std::to_string(m.hidden);
  kv["layers"] = std::to_string(m.layers);
  kv["heads"] = std::to_string(m.heads);
  kv["temporal_heads"] = std::to_string(m.temporal_heads);
  kv["disc_hidden1"] = std::to_string(m.disc_hidden1);
  kv["disc_hidden2"] = std::to_string(m.disc_hidden2);
  kv["per_modality_discriminator"] = m.per_modality_discriminator ? "true" : "false";
  kv["cross_attention"] = m.cross_attention ? "true" : "false";
  kv["impute"] = to_string(m.impute);
  kv["reduction"] = to_string(m.reduction);
  kv["focal_mu"] = format_double(m.focal_mu);
  kv["focal_gamma"] = format_double(m.focal_gamma);
  return kv;
}

ModelConfig model_from_key_values(const KeyValues& kv) {
  KeyValues rest = kv;
  ModelConfig m;
  if (auto it = rest.find("impute"); it != rest.end()) {
    m.impute = impute_mode_from_string(it->second);
    rest.erase(it);
  }
  RunConfig base;
  base.train.model = m;
  for (auto it = rest.begin(); it != rest.end();) {
    if (model_key_values(m).count(it->first)) ++it;
    else it = rest.erase(it);
  }
  m = apply_key_values(rest, base).train.model;
  m.validate();
  return m;
}

}  // namespace mcnet
