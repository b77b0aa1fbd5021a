#include "mcnet/training/model_io.hpp"

#include <sstream>

#include "mcnet/core/errors.hpp"
#include "mcnet/training/config_file.hpp"

namespace mcnet {
namespace {

const Eigen::MatrixXd& array(const Checkpoint& c, const std::string& name) {
  const auto it = c.arrays.find(name);
  if (it == c.arrays.end()) throw SchemaError("checkpoint: missing array '" + name + "'");
  return it->second;
}

Eigen::RowVectorXd row(const Checkpoint& c, const std::string& name) {
  const Eigen::MatrixXd& m = array(c, name);
  if (m.rows() != 1) throw SchemaError("checkpoint: array '" + name + "' must be a row");
  return m;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw SchemaError("checkpoint: bad metadata value for '" + key + "'");
  }
}

}  // namespace

Checkpoint model_checkpoint(const TrainResult& result, const Cohort& cohort, const TrainConfig& config) {
  require(!cohort.norm.empty(), "model_checkpoint: cohort is not normalised");
  Checkpoint c;
  KeyValues meta = model_key_values(result.model);
  meta["split_seed"] = std::to_string(config.seed);
  meta["test_fold"] = std::to_string(config.holdout.test_fold);
  meta["validation_fold"] = std::to_string(config.holdout.validation_fold);
  c.metadata = format_key_values(meta);
  store_to_checkpoint(result.params, c);
  for (auto s : kModalities) {
    const std::string m(modality_name(s));
    c.arrays["norm/mean/" + m] = cohort.norm.mean[idx(s)];
    c.arrays["norm/sd/" + m] = cohort.norm.sd[idx(s)];
    c.arrays["fill/" + m] = result.fill_mean[idx(s)];
  }
  return c;
}

LoadedModel load_model(const Checkpoint& ckpt) {
  std::istringstream in(ckpt.metadata);
  KeyValues meta = parse_key_values(in);
  LoadedModel m;
  for (const char* key : {"split_seed", "test_fold", "validation_fold"})
    if (!meta.count(key)) throw SchemaError(std::string("checkpoint: metadata lacks '") + key + "'");
  m.split_seed = parse_u64("split_seed", meta["split_seed"]);
  m.holdout.test_fold = static_cast<int>(parse_u64("test_fold", meta["test_fold"]));
  m.holdout.validation_fold = static_cast<int>(parse_u64("validation_fold", meta["validation_fold"]));
  meta.erase("split_seed");
  meta.erase("test_fold");
  meta.erase("validation_fold");
  m.model = model_from_key_values(meta);
  m.params = init_parameters(m.model, 0);
  checkpoint_to_store(ckpt, m.params);
  for (auto s : kModalities) {
    const std::string name(modality_name(s));
    m.norm.mean[idx(s)] = row(ckpt, "norm/mean/" + name);
    m.norm.sd[idx(s)] = row(ckpt, "norm/sd/" + name);
    m.fill_mean[idx(s)] = row(ckpt, "fill/" + name);
    if (m.norm.mean[idx(s)].size() != m.model.dim || m.norm.sd[idx(s)].size() != m.model.dim ||
        m.fill_mean[idx(s)].size() != m.model.dim)
      throw SchemaError("checkpoint: statistics width does not match the model");
  }
  return m;
}

Cohort prepare_for(const LoadedModel& m, const Cohort& raw) {
  if (raw.dim != m.model.dim || raw.visits != m.model.visits)
    throw SchemaError("cohort shape (" + std::to_string(raw.visits) + " visits, " + std::to_string(raw.dim) +
                      " features) does not match the model");
  Cohort c = raw;
  c.folds = split_stratified(raw, m.split_seed);
  return apply_normalization(c, m.norm);
}

}  // namespace mcnet
