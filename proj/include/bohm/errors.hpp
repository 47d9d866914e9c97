#pragma once

#include <stdexcept>
#include <string>

namespace bohm {

// Base class for every error raised by the library. Subclasses name the
// failure kind so callers (and the CLI) can report it precisely.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define BOHM_DEFINE_ERROR(Name)                                      \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(#Name, what) {}   \
  }

BOHM_DEFINE_ERROR(InvalidArgument);
BOHM_DEFINE_ERROR(ZeroNorm);
BOHM_DEFINE_ERROR(GridMismatch);
BOHM_DEFINE_ERROR(GridCapExceeded);
BOHM_DEFINE_ERROR(EmptyAxisSet);
BOHM_DEFINE_ERROR(RegionOutOfBounds);
BOHM_DEFINE_ERROR(NonFiniteAmplitude);
BOHM_DEFINE_ERROR(MaskedPoint);
BOHM_DEFINE_ERROR(UnnormalizedDensity);
BOHM_DEFINE_ERROR(SupportViolation);
BOHM_DEFINE_ERROR(TooManyUnassigned);
BOHM_DEFINE_ERROR(NodalPoint);
BOHM_DEFINE_ERROR(SuperluminalBoost);
BOHM_DEFINE_ERROR(ConfigParse);
BOHM_DEFINE_ERROR(ValidationFailure);

#undef BOHM_DEFINE_ERROR

}  // namespace bohm
