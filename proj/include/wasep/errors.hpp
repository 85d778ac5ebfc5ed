#pragma once

#include <stdexcept>
#include <string>

namespace wasep {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define WASEP_ERROR(Name)                      \
    struct Name : Error {                      \
        using Error::Error;                    \
    }

WASEP_ERROR(InvalidProfileError);
WASEP_ERROR(IndexError);
WASEP_ERROR(DimensionError);
WASEP_ERROR(PreconditionError);
WASEP_ERROR(ArgumentError);
WASEP_ERROR(RangeError);
WASEP_ERROR(CapabilityError);
WASEP_ERROR(ResourceError);
WASEP_ERROR(DomainError);
WASEP_ERROR(DecodeError);
WASEP_ERROR(DataError);
WASEP_ERROR(ConfigError);
WASEP_ERROR(TestFunctionError);

#undef WASEP_ERROR

}  // namespace wasep
