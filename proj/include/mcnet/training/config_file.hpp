#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "mcnet/data/synth.hpp"
#include "mcnet/training/training.hpp"

namespace mcnet {

/// Flat `key = value` document. Blank lines and lines starting with '#' are
/// skipped.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::string& path);
std::string format_key_values(const KeyValues& kv);

/// Everything a config file can set. `dim`, `visits` and `seed` are shared by
/// the generator and the model.
struct RunConfig {
  SynthConfig synth;
  TrainConfig train;
};

/// Applies recognised keys on top of `base`; an unknown key or a malformed
/// value is a ConfigError.
RunConfig apply_key_values(const KeyValues& kv, RunConfig base = {});
KeyValues to_key_values(const RunConfig& cfg);

/// Model configuration round trip used by checkpoint metadata.
KeyValues model_key_values(const ModelConfig& m);
ModelConfig model_from_key_values(const KeyValues& kv);

}  // namespace mcnet
