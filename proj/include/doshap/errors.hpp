#pragma once

#include <stdexcept>
#include <string>

namespace doshap {

// Root of the library's error hierarchy. The CLI maps any Error to exit
// code 3; configuration problems caught before engine start map to 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define DOSHAP_ERROR_TYPE(Name)                                    \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& w) : Error(#Name ": " + w) {} \
  }

// Graph construction / queries.
DOSHAP_ERROR_TYPE(CycleError);
DOSHAP_ERROR_TYPE(UnknownNode);
DOSHAP_ERROR_TYPE(DuplicateLabel);
DOSHAP_ERROR_TYPE(RejectionBudgetExceeded);

// Structural model simulation.
DOSHAP_ERROR_TYPE(InvalidIntervention);
DOSHAP_ERROR_TYPE(UnsupportedContinuous);
DOSHAP_ERROR_TYPE(UnknownDgp);
DOSHAP_ERROR_TYPE(NonAdditiveNoise);
DOSHAP_ERROR_TYPE(ConfoundedTarget);

// Value functions.
DOSHAP_ERROR_TYPE(EmptyBackground);
DOSHAP_ERROR_TYPE(NoMatchingBackground);
DOSHAP_ERROR_TYPE(ContinuousConditioning);

// Attribution engine.
DOSHAP_ERROR_TYPE(IdentifiabilityError);
DOSHAP_ERROR_TYPE(TooManyFeatures);
DOSHAP_ERROR_TYPE(ShapeMismatch);
DOSHAP_ERROR_TYPE(AllZeroAttribution);

#undef DOSHAP_ERROR_TYPE

}  // namespace doshap
