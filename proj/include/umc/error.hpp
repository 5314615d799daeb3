#pragma once

#include <stdexcept>
#include <string>

namespace umc {

/// Base of every error raised by the library. Callers that only need a
/// message can catch this; the subclasses tag the failing contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define UMC_DECLARE_ERROR(Name)              \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

UMC_DECLARE_ERROR(ConfigError);
UMC_DECLARE_ERROR(SchemaError);
UMC_DECLARE_ERROR(ParseError);
UMC_DECLARE_ERROR(IoError);
UMC_DECLARE_ERROR(ShapeError);
UMC_DECLARE_ERROR(DomainError);
UMC_DECLARE_ERROR(LookupError);
UMC_DECLARE_ERROR(NumericError);
UMC_DECLARE_ERROR(ContractError);
UMC_DECLARE_ERROR(OptimizerError);
UMC_DECLARE_ERROR(TrainingError);
UMC_DECLARE_ERROR(MetricError);
UMC_DECLARE_ERROR(FitError);

#undef UMC_DECLARE_ERROR

}  // namespace umc
