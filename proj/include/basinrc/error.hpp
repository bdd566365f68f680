#pragma once

#include <stdexcept>
#include <string>

namespace basinrc {

// Base of every error the library raises. Callers that only need a
// message catch this; the derived types identify the failure mode.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

#define BASINRC_DEFINE_ERROR(Name)                                             \
  class Name : public Error {                                                  \
  public:                                                                      \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {}       \
  }

BASINRC_DEFINE_ERROR(InvalidArgument);
BASINRC_DEFINE_ERROR(DimensionMismatch);
BASINRC_DEFINE_ERROR(NonFinite);
BASINRC_DEFINE_ERROR(ZeroRange);
BASINRC_DEFINE_ERROR(SingularSpectrum);
BASINRC_DEFINE_ERROR(SingularSystem);
BASINRC_DEFINE_ERROR(TooShort);
BASINRC_DEFINE_ERROR(StepSizeUnderflow);
BASINRC_DEFINE_ERROR(DegenerateCloud);
BASINRC_DEFINE_ERROR(SamplingExhausted);
BASINRC_DEFINE_ERROR(InvalidWindow);
BASINRC_DEFINE_ERROR(SchemaMismatch);
BASINRC_DEFINE_ERROR(IoError);
BASINRC_DEFINE_ERROR(ConfigError);

#undef BASINRC_DEFINE_ERROR

} // namespace basinrc
