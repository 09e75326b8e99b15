#pragma once

#include <stdexcept>
#include <string>

namespace convsense {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define CONVSENSE_DEFINE_ERROR(Name)                         \
  class Name : public Error {                                \
   public:                                                   \
    explicit Name(const std::string& what) : Error(what) {}  \
  }

CONVSENSE_DEFINE_ERROR(InvalidArgument);
CONVSENSE_DEFINE_ERROR(DimensionMismatch);
CONVSENSE_DEFINE_ERROR(GeometryMismatch);
CONVSENSE_DEFINE_ERROR(ZeroFilter);
CONVSENSE_DEFINE_ERROR(NotNormalized);
CONVSENSE_DEFINE_ERROR(SparsityTooLarge);
CONVSENSE_DEFINE_ERROR(SwitchOutOfRange);
CONVSENSE_DEFINE_ERROR(EnumerationTooLarge);
CONVSENSE_DEFINE_ERROR(DeltaOutOfRange);
CONVSENSE_DEFINE_ERROR(BadRange);
CONVSENSE_DEFINE_ERROR(NonFiniteObjective);
CONVSENSE_DEFINE_ERROR(DegenerateTrial);
CONVSENSE_DEFINE_ERROR(IoError);

#undef CONVSENSE_DEFINE_ERROR

}  // namespace convsense
