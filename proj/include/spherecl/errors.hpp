#pragma once

#include <stdexcept>

namespace spherecl {

// One exception type per named failure condition, so callers and tests can
// catch the exact condition instead of parsing messages.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ZeroRowError : Error { using Error::Error; };
struct NormViolation : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct ArityError : Error { using Error::Error; };
struct DegenerateStep : Error { using Error::Error; };
struct SingularEvaluation : Error { using Error::Error; };
struct ConditionViolation : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };
struct SpecError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace spherecl
