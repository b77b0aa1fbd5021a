#pragma once

#include <cstdint>
#include <string>

#include "mcnet/core/parameter_store.hpp"
#include "mcnet/core/tape.hpp"

namespace mcnet {

/// How masked input rows are filled before they reach the recurrence.
enum class ImputeMode {
  Model,    // multi-view estimates
  Mean,     // training mean per feature
  Forward,  // last present value on the grid, else training mean
  Linear,   // interpolation between present neighbours, else forward
};

/// Reduction of fused token matrices before the classifier heads.
enum class HeadReduction { Flatten, Mean };

std::string to_string(ImputeMode m);
ImputeMode impute_mode_from_string(const std::string& s);
std::string to_string(HeadReduction r);
HeadReduction head_reduction_from_string(const std::string& s);

struct ModelConfig {
  int dim = 20;      // D, features per modality
  int hidden = 128;  // D'
  int layers = 3;
  int heads = 4;           // J, modality block
  int temporal_heads = 4;  // J', temporal block
  int visits = 5;          // T
  int disc_hidden1 = 64;
  int disc_hidden2 = 32;
  bool per_modality_discriminator = false;
  bool cross_attention = true;
  ImputeMode impute = ImputeMode::Model;
  HeadReduction reduction = HeadReduction::Flatten;
  double focal_mu = 0.3;
  double focal_gamma = 2.0;

  void validate() const;
  /// Width of the vector fed to the conversion head.
  int conversion_input() const;
};

/// Creates every parameter the configuration uses: Xavier-uniform weights,
/// zero biases, zero mixing logits (alpha = beta = 0.5).
ParameterStore init_parameters(const ModelConfig& cfg, std::uint64_t seed);

/// Parameter namespaces.
namespace ns {
inline constexpr const char* kRnn = "rnn";
inline constexpr const char* kImputation = "imp";
inline constexpr const char* kDiscriminator = "disc";
inline constexpr const char* kModalityAttention = "att1";
inline constexpr const char* kLongitudinalHead = "cls";
inline constexpr const char* kTemporalAttention = "att2";
inline constexpr const char* kConversionHead = "conv";
}  // namespace ns

ParamFilter generator_params();
ParamFilter discriminator_params();
ParamFilter prediction_params();

/// Parameter lookup bound to one tape with a fixed tracking mode.
struct ParamAccess {
  Tape& tape;
  ParameterStore& store;
  Track track = Track::Yes;

  Var operator()(const std::string& name) const { return tape.param(store, name, track); }
  ParamAccess with(Track t) const { return {tape, store, t}; }
};

}  // namespace mcnet
