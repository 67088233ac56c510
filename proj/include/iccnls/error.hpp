#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace iccnls {

enum class ErrorCode {
    DimensionMismatch,
    NonFiniteValue,
    InvalidConfig,
    EmptyInput,
    UnsupportedCombination,
    Infeasible,
    TooLarge,
    SolverFailed,
    MissingColumn,
    UnparsableNumeric,
    EmptyFile,
    CorruptModel,
    Io,
    IndexMisalignment,
    FingerprintMismatch,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace iccnls
