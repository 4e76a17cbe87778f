#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace incentive_lab {

enum class ErrorCode {
    InfeasibleSpec,
    DegenerateDraw,
    EmptyInput,
    DuplicateDeduction,
    DayOutOfRange,
    UnknownSurvey,
    PastDeadline,
    TooEarly,
    ClockRegression,
    InvalidState,
    InvalidSpec,
    EmptyDataset,
    PostPhaseDisabled,
    EmptySample,
    DegenerateMargins,
    AllZeroDifferences,
    Separation,
    Singular,
    NonConvergence,
    ParseError,
    MissingColumn,
    IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InfeasibleSpec: return "InfeasibleSpec";
        case ErrorCode::DegenerateDraw: return "DegenerateDraw";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::DuplicateDeduction: return "DuplicateDeduction";
        case ErrorCode::DayOutOfRange: return "DayOutOfRange";
        case ErrorCode::UnknownSurvey: return "UnknownSurvey";
        case ErrorCode::PastDeadline: return "PastDeadline";
        case ErrorCode::TooEarly: return "TooEarly";
        case ErrorCode::ClockRegression: return "ClockRegression";
        case ErrorCode::InvalidState: return "InvalidState";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::PostPhaseDisabled: return "PostPhaseDisabled";
        case ErrorCode::EmptySample: return "EmptySample";
        case ErrorCode::DegenerateMargins: return "DegenerateMargins";
        case ErrorCode::AllZeroDifferences: return "AllZeroDifferences";
        case ErrorCode::Separation: return "Separation";
        case ErrorCode::Singular: return "Singular";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every recoverable failure in the library is reported as a LabError
/// carrying a machine-readable code.
class LabError : public std::runtime_error {
   public:
    LabError(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

   private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw LabError(code, message);
}

}  // namespace incentive_lab
