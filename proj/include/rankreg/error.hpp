#pragma once

#include <stdexcept>
#include <string>

namespace rankreg {

// Every failure mode the library reports. Callers that care about the
// specific condition switch on the code; the message is for humans.
enum class ErrorCode {
    NotSymmetric,
    NotPositiveDefinite,
    RankTooLarge,
    DegenerateSpectrum,
    SingularNormalMatrix,
    SingularBlock,
    SingularSchurComplement,
    InvalidSpec,
    RankDeficiencyAmbiguous,
    UnstableBlock,
    NotI1,
    InfeasibleDimensions,
    TooShort,
    LengthMismatch,
    LagOutOfRange,
    SingularGram,
    SingularLongRun,
    WffNotPositiveDefinite,
    SelectorSingular,
    SingularMoment,
    ConfigError,
    IoError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

} // namespace rankreg
