#include "mcnet/model/config.hpp"

#include <random>

#include "mcnet/core/errors.hpp"
#include "mcnet/data/cohort.hpp"
#include "mcnet/model/adversarial.hpp"
#include "mcnet/model/minimal_rnn.hpp"

namespace mcnet {

std::string to_string(ImputeMode m) {
  switch (m) {
    case ImputeMode::Model: return "model";
    case ImputeMode::Mean: return "mean";
    case ImputeMode::Forward: return "forward";
    case ImputeMode::Linear: return "linear";
  }
  return "model";
}

ImputeMode impute_mode_from_string(const std::string& s) {
  if (s == "model") return ImputeMode::Model;
  if (s == "mean") return ImputeMode::Mean;
  if (s == "forward") return ImputeMode::Forward;
  if (s == "linear") return ImputeMode::Linear;
  throw ConfigError("unknown impute mode '" + s + "'");
}

std::string to_string(HeadReduction r) { return r == HeadReduction::Flatten ? "flatten" : "mean"; }

HeadReduction head_reduction_from_string(const std::string& s) {
  if (s == "flatten") return HeadReduction::Flatten;
  if (s == "mean") return HeadReduction::Mean;
  throw ConfigError("unknown head reduction '" + s + "'");
}

void ModelConfig::validate() const {
  if (dim < 1 || hidden < 1 || layers < 1 || visits < 1) throw ConfigError("model: dimensions must be positive");
  if (heads < 1 || hidden % heads != 0) throw ConfigError("model: hidden must be divisible by heads");
  if (temporal_heads < 1 || (2 * hidden) % temporal_heads != 0)
    throw ConfigError("model: 2*hidden must be divisible by temporal_heads");
  if (disc_hidden1 < 1 || disc_hidden2 < 1) throw ConfigError("model: discriminator widths must be positive");
  if (!(focal_mu >= 0) || !(focal_gamma >= 0)) throw ConfigError("model: focal parameters must be >= 0");
}

int ModelConfig::conversion_input() const {
  return reduction == HeadReduction::Flatten ? visits * 2 * hidden : 2 * hidden;
}

ParameterStore init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParameterStore store;
  std::mt19937_64 rng(seed);
  const int D = cfg.dim, H = cfg.hidden;

  for (auto s : kModalities) {
    for (int l = 0; l < cfg.layers; ++l) {
      const auto pre = cell_prefix(s, l);
      store.add_xavier(pre + ".w_x", l == 0 ? D : H, H, rng);
      store.add_zeros(pre + ".b_x", 1, H);
      store.add_xavier(pre + ".w_h", H, H, rng);
      store.add_xavier(pre + ".w_z", H, H, rng);
    }
  }
  store.add_xavier("imp.w_cs", H, D, rng);
  store.add_zeros("imp.b_cs", 1, D);
  store.add_xavier("imp.w_lg", 2 * H, 2 * D, rng);
  store.add_zeros("imp.b_lg", 1, 2 * D);
  store.add_zeros("imp.mix", 1, 2);

  auto add_disc = [&](const std::string& pre) {
    store.add_xavier(pre + ".w1", D, cfg.disc_hidden1, rng);
    store.add_zeros(pre + ".b1", 1, cfg.disc_hidden1);
    store.add_xavier(pre + ".w2", cfg.disc_hidden1, cfg.disc_hidden2, rng);
    store.add_zeros(pre + ".b2", 1, cfg.disc_hidden2);
    store.add_xavier(pre + ".w3", cfg.disc_hidden2, 1, rng);
    store.add_zeros(pre + ".b3", 1, 1);
  };
  if (cfg.per_modality_discriminator) {
    add_disc(discriminator_prefix(cfg, Modality::Mri));
    add_disc(discriminator_prefix(cfg, Modality::Pet));
  } else {
    add_disc(discriminator_prefix(cfg, Modality::Mri));
  }

  auto add_attention = [&](const std::string& pre, int width) {
    store.add_xavier(pre + ".w_q", width, width, rng);
    store.add_xavier(pre + ".w_k", width, width, rng);
    store.add_xavier(pre + ".w_v", width, width, rng);
    store.add_xavier(pre + ".w_o", width, width, rng);
    store.add_zeros(pre + ".b_o", 1, width);
  };
  if (cfg.cross_attention) add_attention(ns::kModalityAttention, H);
  store.add_xavier("cls.w", 2 * H, 2, rng);
  store.add_zeros("cls.b", 1, 2);
  if (cfg.cross_attention) add_attention(ns::kTemporalAttention, 2 * H);
  store.add_xavier("conv.w", cfg.conversion_input(), 2, rng);
  store.add_zeros("conv.b", 1, 2);
  return store;
}

ParamFilter generator_params() { return in_namespaces({ns::kRnn, ns::kImputation}); }
ParamFilter discriminator_params() { return in_namespaces({ns::kDiscriminator}); }
ParamFilter prediction_params() {
  return in_namespaces({ns::kModalityAttention, ns::kLongitudinalHead, ns::kTemporalAttention, ns::kConversionHead});
}

}  // namespace mcnet
