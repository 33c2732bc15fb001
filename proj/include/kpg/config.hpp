#pragma once

#include <map>
#include <string>

#include "kpg/coupling.hpp"
#include "kpg/device.hpp"

namespace kpg {

struct FieldConfig {
  double b_tesla = 0.1;
  double theta_deg = 90.0;  // polar angle from z
  double phi_deg = 0.0;     // azimuthal angle from x
  double v_ac = 1e-3;       // drive amplitude, volts
  double fixed_zeeman_ghz = 0.0;  // >0 selects constant-splitting maps
};

struct SolverConfig {
  int pairs = 25;            // Kramers doublets in the solve window
  double delta_v = 1e-3;     // volts, for g-prime differencing
  double delta_b = 1e-4;     // tesla, for M1 differencing
  double pairing_tol = 1e-6; // meV
  double tol = 1e-9;         // eigensolver residual / spectral spread
  uint64_t seed = 1;
  int max_iterations = 400;
};

struct SweepConfig {
  enum class Kind { None, Voltage, Strain };
  Kind kind = Kind::None;
  std::string gate;          // voltage sweeps
  double from = 0.0, to = 0.0;  // volts, or percent strain
  int steps = 0;
};

struct MapConfig {
  int theta_steps = 37;
  int phi_steps = 37;
};

struct RunConfig {
  std::map<std::string, double> bias;  // gate name -> volts
  std::string drive_gate;
  FieldConfig field;
  SolverConfig solver;
  CouplingFlags flags;
  SweepConfig sweep;
  MapConfig map;
  double symmetry_tol = 1e-6;
  std::string output_dir = "out";

  uint64_t content_hash() const;
};

struct ParsedConfig {
  DeviceSpec device;
  RunConfig run;
};

// Structured-text configuration; grammar in docs/device-format.md.
ParsedConfig parse_config_text(const std::string& text,
                               const std::string& source_name);
ParsedConfig parse_config_file(const std::string& path);

}  // namespace kpg
