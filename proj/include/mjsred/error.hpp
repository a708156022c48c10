#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mjsred {

/// Failure categories raised by the library. Every thrown mjsred::Error carries one.
enum class Errc {
    InvalidModel,
    DimensionMismatch,
    PartitionMismatch,
    NotErgodic,
    BadWeights,
    RankDeficient,
    DegenerateInput,
    SizeMismatch,
    InfeasibleBlock,
    TooLarge,
    RhoTooSmall,
    XiTooSmall,
    TooManySequences,
    NotNormalized,
    SingularInnerMatrix,
    Diverged,
    NotMss,
    ParseError,
};

constexpr std::string_view errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::InvalidModel: return "InvalidModel";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::PartitionMismatch: return "PartitionMismatch";
    case Errc::NotErgodic: return "NotErgodic";
    case Errc::BadWeights: return "BadWeights";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::InfeasibleBlock: return "InfeasibleBlock";
    case Errc::TooLarge: return "TooLarge";
    case Errc::RhoTooSmall: return "RhoTooSmall";
    case Errc::XiTooSmall: return "XiTooSmall";
    case Errc::TooManySequences: return "TooManySequences";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::SingularInnerMatrix: return "SingularInnerMatrix";
    case Errc::Diverged: return "Diverged";
    case Errc::NotMss: return "NotMss";
    case Errc::ParseError: return "ParseError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

} // namespace mjsred
