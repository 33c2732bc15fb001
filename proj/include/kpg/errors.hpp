#pragma once

#include <stdexcept>
#include <string>

namespace kpg {

// Error taxonomy for the whole library. Validation errors indicate a bad
// device spec / run configuration (CLI exit code 2); solver errors indicate
// a numerical failure at runtime (CLI exit code 3).
enum class ErrorCode {
  // device-model
  OverlappingRegions,
  RegionGap,
  DanglingGate,
  NegativeDimension,
  SpacingTooCoarse,
  UnknownMaterial,
  ConfigParse,
  InvalidConfig,
  // electrostatics
  SolverDiverged,
  UnknownGate,
  MisalignedMirror,
  // kp-core
  MeshMismatch,
  // spectrum
  NotConverged,
  DegenerateSubspaceUnresolved,
  UnpairedState,
  // gmatrix
  OverlapTooSmall,
  ZeroLarmor,
  DegenerateExcitedState,
  SingularPrincipalFactor,
  // reference-models
  DimensionTooLarge,
  DegenerateDenominator,
  // cache
  CacheCorrupt,
};

const char* error_name(ErrorCode code);

// Validation errors are user-input problems; everything else is a runtime
// solver/cache failure.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_name(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) {
  throw Error(code, detail);
}

}  // namespace kpg
