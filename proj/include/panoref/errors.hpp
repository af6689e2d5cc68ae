#pragma once

#include <stdexcept>
#include <string>

namespace panoref {

enum class ErrorCategory { Config, Data, Internal };

// Base of every error the library raises. The CLI maps the category onto
// its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ErrorCategory kind() const noexcept { return ErrorCategory::Internal; }
};

#define PANOREF_DEFINE_ERROR(Name, Category)                     \
  class Name : public Error {                                    \
   public:                                                       \
    using Error::Error;                                          \
    static constexpr ErrorCategory category = ErrorCategory::Category; \
    ErrorCategory kind() const noexcept override { return category; } \
  };

PANOREF_DEFINE_ERROR(ConfigError, Config)
PANOREF_DEFINE_ERROR(IoError, Data)
PANOREF_DEFINE_ERROR(FormatError, Data)
PANOREF_DEFINE_ERROR(SerializationError, Data)
PANOREF_DEFINE_ERROR(LengthMismatch, Data)
PANOREF_DEFINE_ERROR(ClassTableMismatch, Data)
PANOREF_DEFINE_ERROR(DegenerateGeometry, Data)
PANOREF_DEFINE_ERROR(InstanceOverflow, Data)
PANOREF_DEFINE_ERROR(NoClusters, Internal)
PANOREF_DEFINE_ERROR(CoverageError, Internal)
PANOREF_DEFINE_ERROR(InvariantViolation, Internal)

#undef PANOREF_DEFINE_ERROR

}  // namespace panoref
