#pragma once

#include <stdexcept>
#include <string>

namespace pngnn {

/// Failure categories shared by the C++ core and the C API status codes.
enum class ErrorCode {
    kInvalidArgument = 1,
    kIo,
    kParse,
    kValidation,
    kRange,
    kShape,
    kState,
    kUnsupported,
    kCompatibility,
    kConfig,
    kSignature,
    kSampling,
    kVerification,
    kNumeric,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

#define PNGNN_DEFINE_ERROR(Name, Code)                                              \
    class Name : public Error {                                                     \
    public:                                                                         \
        explicit Name(const std::string& what) : Error(ErrorCode::Code, what) {}    \
    }

PNGNN_DEFINE_ERROR(InvalidArgument, kInvalidArgument);
PNGNN_DEFINE_ERROR(IoError, kIo);
PNGNN_DEFINE_ERROR(ParseError, kParse);
PNGNN_DEFINE_ERROR(ValidationError, kValidation);
PNGNN_DEFINE_ERROR(RangeError, kRange);
PNGNN_DEFINE_ERROR(ShapeError, kShape);
PNGNN_DEFINE_ERROR(StateError, kState);
PNGNN_DEFINE_ERROR(UnsupportedError, kUnsupported);
PNGNN_DEFINE_ERROR(CompatibilityError, kCompatibility);
PNGNN_DEFINE_ERROR(ConfigError, kConfig);
PNGNN_DEFINE_ERROR(SignatureError, kSignature);
PNGNN_DEFINE_ERROR(SamplingError, kSampling);
PNGNN_DEFINE_ERROR(VerificationError, kVerification);
PNGNN_DEFINE_ERROR(NumericError, kNumeric);

#undef PNGNN_DEFINE_ERROR

} // namespace pngnn
