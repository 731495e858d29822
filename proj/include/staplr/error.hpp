#pragma once

#include <stdexcept>
#include <string>

namespace staplr {

/// Every error raised by the library carries a short machine-readable kind
/// ("invalid-argument", "degenerate-outcome", ...) alongside the message.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define STAPLR_DEFINE_ERROR(Name, tag)                                   \
    class Name : public Error {                                          \
    public:                                                              \
        explicit Name(const std::string& message) : Error(tag, message) {} \
    };

STAPLR_DEFINE_ERROR(InvalidArgument, "invalid-argument")
STAPLR_DEFINE_ERROR(DegenerateOutcome, "degenerate-outcome")
STAPLR_DEFINE_ERROR(DegenerateStratification, "degenerate-stratification")
STAPLR_DEFINE_ERROR(DegenerateFold, "degenerate-fold")
STAPLR_DEFINE_ERROR(ZeroVariance, "zero-variance")
STAPLR_DEFINE_ERROR(UndefinedCorrelation, "undefined-correlation")
STAPLR_DEFINE_ERROR(Collinearity, "collinearity")
STAPLR_DEFINE_ERROR(UndefinedMetric, "undefined-metric")
STAPLR_DEFINE_ERROR(ParseError, "parse-error")

#undef STAPLR_DEFINE_ERROR

}  // namespace staplr
