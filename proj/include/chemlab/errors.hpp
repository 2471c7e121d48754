#pragma once

#include <stdexcept>
#include <string>

namespace chemlab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CHEMLAB_DEFINE_ERROR(Name)      \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  };

CHEMLAB_DEFINE_ERROR(InvalidParameter)
CHEMLAB_DEFINE_ERROR(RegimeError)
CHEMLAB_DEFINE_ERROR(ExponentInequalityViolation)
CHEMLAB_DEFINE_ERROR(ModelError)
CHEMLAB_DEFINE_ERROR(QuadratureError)
CHEMLAB_DEFINE_ERROR(SingularQuadratureError)
CHEMLAB_DEFINE_ERROR(DivergenceError)
CHEMLAB_DEFINE_ERROR(StepRejected)
CHEMLAB_DEFINE_ERROR(DtUnderflow)
CHEMLAB_DEFINE_ERROR(ObserverError)
CHEMLAB_DEFINE_ERROR(FitError)
CHEMLAB_DEFINE_ERROR(SearchExhausted)
CHEMLAB_DEFINE_ERROR(InfeasibleSpec)
CHEMLAB_DEFINE_ERROR(InsufficientSamples)
CHEMLAB_DEFINE_ERROR(VerdictFailure)
CHEMLAB_DEFINE_ERROR(ConfigError)

#undef CHEMLAB_DEFINE_ERROR

}  // namespace chemlab
