#pragma once

#include <stdexcept>
#include <string>

namespace mcnet {

// Every error carries a short machine-readable class name; the CLI prints it
// verbatim as the first token of its single-line failure message.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define MCNET_DEFINE_ERROR(Name, tag)                               \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(tag, what) {}     \
  };

MCNET_DEFINE_ERROR(ContractViolation, "contract_violation")
MCNET_DEFINE_ERROR(LookupError, "lookup_error")
MCNET_DEFINE_ERROR(ConfigError, "config_error")
MCNET_DEFINE_ERROR(NumericalError, "numerical_error")
MCNET_DEFINE_ERROR(ParseError, "parse_error")
MCNET_DEFINE_ERROR(SchemaError, "schema_error")
MCNET_DEFINE_ERROR(SplitError, "split_error")
MCNET_DEFINE_ERROR(RolloutError, "rollout_error")
MCNET_DEFINE_ERROR(UndefinedMetric, "undefined_metric")
MCNET_DEFINE_ERROR(IoError, "io_error")

#undef MCNET_DEFINE_ERROR

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

}  // namespace mcnet
