#include "polyprop/errors.hpp"

namespace polyprop {

const char* error_name(ErrorCode code)
{
    switch (code) {
    case ErrorCode::EvenDimension: return "EvenDimension";
    case ErrorCode::DimensionOutOfRange: return "DimensionOutOfRange";
    case ErrorCode::NonPositiveOrder: return "NonPositiveOrder";
    case ErrorCode::KindOutOfRange: return "KindOutOfRange";
    case ErrorCode::ZeroTime: return "ZeroTime";
    case ErrorCode::CoincidenceSingularity: return "CoincidenceSingularity";
    case ErrorCode::OrderTooLarge: return "OrderTooLarge";
    case ErrorCode::FitIllConditioned: return "FitIllConditioned";
    case ErrorCode::MixedRegime: return "MixedRegime";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::PhaseUnderResolved: return "PhaseUnderResolved";
    case ErrorCode::UnsupportedIndex: return "UnsupportedIndex";
    case ErrorCode::BackendUnsupported: return "BackendUnsupported";
    case ErrorCode::ThresholdAmbiguous: return "ThresholdAmbiguous";
    case ErrorCode::MatchingIllConditioned: return "MatchingIllConditioned";
    case ErrorCode::FamilyIncomplete: return "FamilyIncomplete";
    case ErrorCode::EmptyIndexRange: return "EmptyIndexRange";
    case ErrorCode::PivotSingular: return "PivotSingular";
    case ErrorCode::ComplementSingular: return "ComplementSingular";
    case ErrorCode::NeumannDiverges: return "NeumannDiverges";
    case ErrorCode::ResolventSolveFailed: return "ResolventSolveFailed";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

bool is_threshold_error(ErrorCode code)
{
    switch (code) {
    case ErrorCode::ThresholdAmbiguous:
    case ErrorCode::MatchingIllConditioned:
    case ErrorCode::PivotSingular:
    case ErrorCode::ComplementSingular:
    case ErrorCode::NeumannDiverges:
    case ErrorCode::ResolventSolveFailed:
    case ErrorCode::PhaseUnderResolved:
        return true;
    default:
        return false;
    }
}

bool is_fit_error(ErrorCode code)
{
    return code == ErrorCode::FitIllConditioned;
}

}  // namespace polyprop
