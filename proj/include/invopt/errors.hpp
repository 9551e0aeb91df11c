#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace invopt {

enum class ErrorKind {
    NonUniqueRealRoot,
    NegativeTheta,
    InvalidGain,
    NegativeLyapunovValue,
    GridTooSmall,
    UnstableStep,
    HorizonExceeded,
    EmptyLog,
    MismatchedScenarios,
    ParseError,
    IncompatibleLawPlant,
    IoError,
};

constexpr std::string_view to_string(ErrorKind k) noexcept {
    switch (k) {
    case ErrorKind::NonUniqueRealRoot: return "NonUniqueRealRoot";
    case ErrorKind::NegativeTheta: return "NegativeTheta";
    case ErrorKind::InvalidGain: return "InvalidGain";
    case ErrorKind::NegativeLyapunovValue: return "NegativeLyapunovValue";
    case ErrorKind::GridTooSmall: return "GridTooSmall";
    case ErrorKind::UnstableStep: return "UnstableStep";
    case ErrorKind::HorizonExceeded: return "HorizonExceeded";
    case ErrorKind::EmptyLog: return "EmptyLog";
    case ErrorKind::MismatchedScenarios: return "MismatchedScenarios";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IncompatibleLawPlant: return "IncompatibleLawPlant";
    case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

// Every library failure carries a kind so callers can branch without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace invopt
