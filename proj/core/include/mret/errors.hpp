#pragma once

#include <stdexcept>
#include <string>

namespace mret {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// file / container format errors
struct IoFailure : Error { using Error::Error; };
struct BadMagic : Error { using Error::Error; };
struct UnsupportedDatatype : Error { using Error::Error; };
struct TruncatedFile : Error { using Error::Error; };
struct NonVolumetric : Error { using Error::Error; };
struct VersionMismatch : Error { using Error::Error; };
struct ChecksumMismatch : Error { using Error::Error; };

// shape / argument errors
struct DimensionMismatch : Error { using Error::Error; };
struct NonIntegerFactor : Error { using Error::Error; };
struct InvalidSize : Error { using Error::Error; };
struct InvalidDescriptor : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };

// data regime errors
struct DegenerateData : Error { using Error::Error; };
struct SingleClass : Error { using Error::Error; };
struct JoinMismatch : Error { using Error::Error; };

}  // namespace mret
