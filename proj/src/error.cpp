#include "cropshift/error.hpp"

namespace cropshift {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::InsufficientObservations: return "InsufficientObservations";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::UnlabeledData: return "UnlabeledData";
    case ErrorCode::ZeroTrainPrior: return "ZeroTrainPrior";
    case ErrorCode::ClassMismatch: return "ClassMismatch";
    case ErrorCode::AllZeroScores: return "AllZeroScores";
    case ErrorCode::ZeroMeanFieldArea: return "ZeroMeanFieldArea";
    case ErrorCode::AllZeroAreas: return "AllZeroAreas";
    case ErrorCode::InvalidPriors: return "InvalidPriors";
    case ErrorCode::SmoteInfeasible: return "SmoteInfeasible";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::TrainRegionMissingClass: return "TrainRegionMissingClass";
    case ErrorCode::MissingPriors: return "MissingPriors";
    case ErrorCode::TooFewGroups: return "TooFewGroups";
    case ErrorCode::UnknownRegion: return "UnknownRegion";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace cropshift
