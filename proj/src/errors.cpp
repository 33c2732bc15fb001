#include "kpg/errors.hpp"

namespace kpg {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::OverlappingRegions: return "OverlappingRegions";
    case ErrorCode::RegionGap: return "RegionGap";
    case ErrorCode::DanglingGate: return "DanglingGate";
    case ErrorCode::NegativeDimension: return "NegativeDimension";
    case ErrorCode::SpacingTooCoarse: return "SpacingTooCoarse";
    case ErrorCode::UnknownMaterial: return "UnknownMaterial";
    case ErrorCode::ConfigParse: return "ConfigParse";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::SolverDiverged: return "SolverDiverged";
    case ErrorCode::UnknownGate: return "UnknownGate";
    case ErrorCode::MisalignedMirror: return "MisalignedMirror";
    case ErrorCode::MeshMismatch: return "MeshMismatch";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::DegenerateSubspaceUnresolved:
      return "DegenerateSubspaceUnresolved";
    case ErrorCode::UnpairedState: return "UnpairedState";
    case ErrorCode::OverlapTooSmall: return "OverlapTooSmall";
    case ErrorCode::ZeroLarmor: return "ZeroLarmor";
    case ErrorCode::DegenerateExcitedState: return "DegenerateExcitedState";
    case ErrorCode::SingularPrincipalFactor: return "SingularPrincipalFactor";
    case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::CacheCorrupt: return "CacheCorrupt";
  }
  return "UnknownError";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::OverlappingRegions:
    case ErrorCode::RegionGap:
    case ErrorCode::DanglingGate:
    case ErrorCode::NegativeDimension:
    case ErrorCode::SpacingTooCoarse:
    case ErrorCode::UnknownMaterial:
    case ErrorCode::ConfigParse:
    case ErrorCode::InvalidConfig:
    case ErrorCode::UnknownGate:
    case ErrorCode::MisalignedMirror:
    case ErrorCode::DimensionTooLarge:
      return true;
    default:
      return false;
  }
}

}  // namespace kpg
