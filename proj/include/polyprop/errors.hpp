#ifndef POLYPROP_ERRORS_HPP
#define POLYPROP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace polyprop {

enum class ErrorCode {
    EvenDimension,
    DimensionOutOfRange,
    NonPositiveOrder,
    KindOutOfRange,
    ZeroTime,
    CoincidenceSingularity,
    OrderTooLarge,
    FitIllConditioned,
    MixedRegime,
    GridTooCoarse,
    PhaseUnderResolved,
    UnsupportedIndex,
    BackendUnsupported,
    ThresholdAmbiguous,
    MatchingIllConditioned,
    FamilyIncomplete,
    EmptyIndexRange,
    PivotSingular,
    ComplementSingular,
    NeumannDiverges,
    ResolventSolveFailed,
    InvalidConfig,
};

const char* error_name(ErrorCode code);

// Numerical-ambiguity errors map to a different CLI exit code than plain
// validation failures.
bool is_threshold_error(ErrorCode code);
bool is_fit_error(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& context)
        : std::runtime_error(std::string(error_name(code)) + ": " + context), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

}  // namespace polyprop

#endif
