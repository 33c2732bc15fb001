#pragma once

#include <array>
#include <string>
#include <vector>

#include "kpg/gmatrix.hpp"
#include "kpg/kp.hpp"
#include "kpg/poisson.hpp"

namespace kpg {

// Mirror planes are named by their normal axis: axis 0 is sigma_yz, axis 1 is
// sigma_xz and axis 2 is sigma_xy.
const char* mirror_name(int normal_axis);

// A set of entries of a 3x3 matrix that a symmetry forces to vanish
// (true = constrained zero).  Combining constraints unions the zeros.
struct ZeroPattern {
  std::array<std::array<bool, 3>, 3> zero{};
  std::vector<std::string> sources;  // which mirror/parity produced each zero

  bool forbids(int i, int j) const { return zero[i][j]; }
  int zero_count() const;
};

// Zero pattern of the g-matrix for a device with the given mirror planes
// (in the symmetry-adapted doublet basis).
ZeroPattern g_pattern(const std::vector<MirrorPlane>& mirrors);

// Zero pattern of the g-matrix bias derivative.  The parity entry describes
// how the drive field transforms under the matching mirror: an even drive
// keeps the g-matrix constraints, an odd drive enforces the complementary
// set, and Parity::None contributes no constraint.
ZeroPattern g_prime_pattern(const std::vector<MirrorPlane>& mirrors,
                            const std::vector<Parity>& drive_parity);

// Checks a computed matrix against a pattern: every constrained entry must
// stay below tol_rel times the largest entry magnitude.
struct PatternReport {
  bool pass = true;
  double tol_rel = 0.0;
  double worst_ratio = 0.0;  // |entry| / max|matrix| over constrained entries
  int worst_row = -1, worst_col = -1;
  std::vector<std::pair<int, int>> violations;
};
PatternReport verify_pattern(const Matrix3d& m, const ZeroPattern& pattern,
                             double tol_rel);

// Field directions along which the masked shapes of g and g' force the Rabi
// cross product [g b] x [g' b] to vanish identically.
struct ExtinctionPrediction {
  std::vector<int> axes;          // coordinate axes with forced extinction
  bool all_orientations = false;  // g' fully constrained to zero
};
ExtinctionPrediction predict_extinctions(const ZeroPattern& g_pat,
                                         const ZeroPattern& gp_pat);

// Representation data for one mirror plane:
//  - the sign action on the (axial) magnetic field vector,
//  - the SU(2) representative on a Kramers doublet,
//  - the six-band representative on the Bloch functions.
Matrix3d mirror_field_signs(int normal_axis);
Eigen::Matrix2cd mirror_spin_rep(int normal_axis);
Matrix6c mirror_band_rep(int normal_axis);

// Mirror planes of the device geometry: regions, materials, gates and the
// channel strain must all map onto themselves, and the plane must land on
// the mesh so that node reflection is exact.  The x axis is skipped for
// periodic devices.
std::vector<MirrorPlane> detect_mirrors(const DeviceModel& device,
                                        const Mesh& mesh);

// Applies the mirror to a channel wavefunction: node reflection through the
// plane composed with the six-band representative.  Throws MisalignedMirror
// when the plane does not map the channel onto itself.
VecXc apply_mirror(const Mesh& mesh, const MirrorPlane& plane,
                   const VecXc& state);

// Parity of a scalar node field (potential, unit response) under a mirror,
// classified by the relative norm of the odd/even residual.
Parity scalar_parity(const Mesh& mesh, const std::vector<double>& values,
                     const MirrorPlane& plane, double tol);

// Rotates a Kramers doublet into the basis adapted to a mirror plane, in
// which the doublet carries the standard spin representative and the
// g-matrix displays the tabulated zero pattern.  The pair keeps the
// convention up = T down.
struct SymmetricDoublet {
  VecXc down, up;
};
SymmetricDoublet symmetry_adapt(const Mesh& mesh, const MirrorPlane& plane,
                                const VecXc& down, const VecXc& up);

}  // namespace kpg
