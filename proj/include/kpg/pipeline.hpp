#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "kpg/cache.hpp"
#include "kpg/gmatrix.hpp"
#include "kpg/poisson.hpp"
#include "kpg/symmetry.hpp"

namespace kpg {

// Stable fingerprint of one run: device content, mesh content and the full
// run configuration. Stamped into every output file for provenance.
uint64_t run_fingerprint(const DeviceModel& device, const Mesh& mesh,
                         const RunConfig& run);

// Fingerprint of only the inputs that determine g and g': device, mesh,
// bias, coupling flags, solver knobs and the drive gate.  Field orientation
// and map grids are excluded, so a stored g-matrix report can be reused
// across map runs.
uint64_t solve_fingerprint(const DeviceModel& device, const Mesh& mesh,
                           const RunConfig& run);
std::string hash_hex(uint64_t h);

// g-matrix block computed at one bias point, together with its voltage
// derivative and the symmetry analysis of both.
struct GMatrixSet {
  Matrix3d g = Matrix3d::Zero();
  Matrix3d g_prime = Matrix3d::Zero();  // per volt on the drive gate
  PrincipalFactors principal;
  GPrimeSplit split;
  bool split_ok = true;  // false when a principal g-factor vanishes
  Eigen::VectorXd pair_energies;           // meV, descending
  double alpha_minus = 0.0, alpha_plus = 0.0;  // side alignment overlaps

  std::vector<MirrorPlane> mirrors;    // geometric mirrors of the device
  std::vector<Parity> bias_parity;     // bias potential parity per mirror
  std::vector<Parity> drive_parity;    // drive response parity per mirror
  // Mirrors whose bias potential is even constrain the doublet; their
  // patterns are verified in that mirror's own adapted doublet basis.
  std::vector<int> constrained;
  std::vector<PatternReport> g_reports;   // parallel to `constrained`
  std::vector<PatternReport> gp_reports;  // parallel to `constrained`
  ExtinctionPrediction extinctions;

  uint64_t config_hash = 0;  // full run configuration
  uint64_t solve_hash = 0;   // solve-relevant inputs only
  double b_tesla = 0.0, v_ac = 0.0, delta_v = 0.0;
};

// One side solve of the g-prime difference, aligned to the base doublet.
struct SidePoint {
  PotentialField pot;
  VecXc down, up;
  double alpha = 0.0;  // min projected norm of the alignment
};

// Everything downstream commands need after the three solves at
// V0 and V0 +- delta_v.
struct SolveBundle {
  PotentialField pot;           // at the base bias
  Vec3 gauge_origin;            // fixed here for every later assembly
  UnitResponse drive_response;  // unit response of the drive gate
  SparseC drive;                // -e d1 over the channel (meV per volt)
  PairedStates paired;          // doublet 0 mirror-adapted when possible
  std::array<Eigen::MatrixXcd, 3> m1_all;  // paired-basis magnetic elements
  Eigen::MatrixXcd drive_all;              // paired-basis drive elements
  SidePoint minus, plus;
  GMatrixSet gset;
  int cache_hits = 0, cache_misses = 0;
};

// Full solve chain at the configured bias: Poisson, eigensolve, Kramers
// pairing, mirror detection and adaptation, g and g' with their symmetry
// reports. `cache` may be null or disabled.
SolveBundle run_solve(const DeviceModel& device, const Mesh& mesh,
                      const RunConfig& run, SolveCache* cache);

// Larmor/Rabi map over field orientations; no eigensolves involved.
struct RabiMapRow {
  double theta_deg = 0.0, phi_deg = 0.0;
  double g_star = 0.0;
  double b_tesla = 0.0;
  double f_larmor_hz = 0.0;
  double f_rabi_hz = 0.0;
  bool zero_larmor = false;
};
struct RabiMap {
  std::vector<RabiMapRow> rows;
  int theta_steps = 0, phi_steps = 0;
  double fixed_zeeman_ghz = 0.0;  // 0 = constant-field map
  double v_ac = 0.0;
  uint64_t config_hash = 0;
  double max_f_rabi() const;
};
RabiMap run_rabimap(const GMatrixSet& gset, const FieldConfig& field,
                    const MapConfig& map, int threads);

// One point of a bias or strain sweep. Failed points carry their error and
// leave the numeric fields NaN.
struct SweepRow {
  double x = 0.0;                  // volts, or percent strain
  std::vector<double> gaps_mev;    // E_0 - E_n per excited doublet
  double g_axis[3] = {0, 0, 0};    // effective g along x, y, z
  Vec3 gp_frame_diag = Vec3::Zero();  // principal-frame g' diagonal
  double f_rabi_hz = 0.0;
  double dominant_share = 0.0;  // largest perturbation term / sum of terms
  double hh_weight = 0.0;       // heavy-hole weight of the ground doublet
  bool ok = true;
  std::string error;
};
struct SweepTable {
  std::string variable;  // "bias_v" or "strain_percent"
  std::string gate;      // voltage sweeps only
  std::vector<SweepRow> rows;
  int pairs = 0;
  uint64_t config_hash = 0;
};
SweepTable run_sweep(const DeviceModel& device, const Mesh& mesh,
                     const RunConfig& run, SolveCache* cache);

// Invariant audit: every row is one named check with its measured value.
struct CheckRow {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};
struct CheckReport {
  std::vector<CheckRow> rows;
  uint64_t config_hash = 0;
  bool all_pass() const;
};
CheckReport run_check(const DeviceModel& device, const Mesh& mesh,
                      const RunConfig& run, SolveCache* cache);

// Geometry-level symmetry survey (Poisson solves only, no eigensolves).
struct SymmetryReport {
  std::vector<MirrorPlane> mirrors;
  std::vector<Parity> bias_parity;
  std::vector<Parity> drive_parity;
  ZeroPattern g_pattern;        // union over even-bias mirrors
  ZeroPattern g_prime_pattern;  // with the observed drive parities
  ExtinctionPrediction extinctions;
  uint64_t config_hash = 0;
};
SymmetryReport run_symmetry(const DeviceModel& device, const Mesh& mesh,
                            const RunConfig& run);

// Serialization. CSV files start with a "# config_hash=..." comment line
// followed by a fixed-order header row; JSON documents carry the same hash.
std::string gmatrix_to_json(const GMatrixSet& gset);
GMatrixSet gmatrix_from_json(const std::string& text);
void write_rabimap_csv(std::ostream& os, const RabiMap& map);
std::string rabimap_to_json(const RabiMap& map);
void write_sweep_csv(std::ostream& os, const SweepTable& table);
std::string sweep_to_json(const SweepTable& table);
void write_check_csv(std::ostream& os, const CheckReport& report);
std::string check_to_json(const CheckReport& report);
std::string symmetry_to_json(const SymmetryReport& report);

}  // namespace kpg
