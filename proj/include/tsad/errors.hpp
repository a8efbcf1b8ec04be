#pragma once

#include <stdexcept>
#include <string>

namespace tsad {

// Every failure raised by the library derives from Error so callers can map
// it to a structured message and a nonzero exit code. kind() names the class
// of failure in reports and CLI output.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define TSAD_DEFINE_ERROR(Name, tag)                                   \
    class Name : public Error {                                        \
    public:                                                            \
        explicit Name(const std::string& what) : Error(tag, what) {}   \
    };

TSAD_DEFINE_ERROR(ParseError, "parse")
TSAD_DEFINE_ERROR(DataError, "data")
TSAD_DEFINE_ERROR(ArgumentError, "argument")
TSAD_DEFINE_ERROR(ShapeError, "shape")
TSAD_DEFINE_ERROR(SpecError, "spec")
TSAD_DEFINE_ERROR(ContractError, "contract")
TSAD_DEFINE_ERROR(NumericError, "numeric")
TSAD_DEFINE_ERROR(ConfigError, "config")
TSAD_DEFINE_ERROR(BudgetError, "budget")
TSAD_DEFINE_ERROR(TimeoutError, "timeout")
TSAD_DEFINE_ERROR(IoError, "io")
TSAD_DEFINE_ERROR(VersionError, "version")

#undef TSAD_DEFINE_ERROR

}  // namespace tsad
