#include "kpg/symmetry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "kpg/errors.hpp"
#include "kpg/spectrum.hpp"

namespace kpg {

namespace {

void require_axis(int axis) {
  if (axis < 0 || axis > 2) {
    fail(ErrorCode::InvalidConfig,
         "mirror axis must be 0 (x), 1 (y) or 2 (z), got " +
             std::to_string(axis));
  }
}

// A mirror with normal `axis` flips the normal component of a polar vector
// and, being improper, the tangential components of an axial one.  The
// doublet representative is proportional to sigma_axis, so conjugation acts
// on the Pauli vector with the same signs as on the field.  An entry g_ij
// then survives iff row i and column j transform with equal signs: zeros sit
// exactly where one of (i, j) equals the mirror normal.
bool even_zero(int axis, int i, int j) { return (i == axis) != (j == axis); }

// An odd drive flips the overall sign of the constraint, selecting the
// complementary entries.
bool odd_zero(int axis, int i, int j) { return !even_zero(axis, i, j); }

Box reflect_box(const Box& b, int axis, double position) {
  Box out = b;
  out.lo[axis] = 2.0 * position - b.hi[axis];
  out.hi[axis] = 2.0 * position - b.lo[axis];
  return out;
}

bool boxes_equal(const Box& a, const Box& b, double tol) {
  return (a.lo - b.lo).cwiseAbs().maxCoeff() <= tol &&
         (a.hi - b.hi).cwiseAbs().maxCoeff() <= tol;
}

// Shear components mixing the mirror normal with an in-plane axis change
// sign under the reflection, so an invariant strain must have them zero.
bool strain_allows_mirror(const StrainTensor& strain, int axis) {
  const double tol = 1e-12;
  switch (axis) {
    case 0: return std::abs(strain.xy) <= tol && std::abs(strain.xz) <= tol;
    case 1: return std::abs(strain.xy) <= tol && std::abs(strain.yz) <= tol;
    default: return std::abs(strain.xz) <= tol && std::abs(strain.yz) <= tol;
  }
}

// Reflected node index along the mirror axis, or -1 when it leaves the grid.
long reflected_index(const Mesh& mesh, int axis, long twice_plane, long i) {
  long r = twice_plane - i;
  if (axis == 0 && mesh.periodic_x) {
    r %= mesh.n[0];
    if (r < 0) r += mesh.n[0];
  }
  return (r >= 0 && r < mesh.n[axis]) ? r : -1;
}

// 2(position - origin)/h: node i reflects to index t - i, so t must be an
// integer for the reflection to act on the grid.
long plane_offset(const Mesh& mesh, const MirrorPlane& plane) {
  require_axis(plane.axis);
  const double t =
      2.0 * (plane.position - mesh.origin[plane.axis]) / mesh.h[plane.axis];
  const double rounded = std::round(t);
  if (std::abs(t - rounded) > 1e-6) {
    fail(ErrorCode::MisalignedMirror,
         std::string(mirror_name(plane.axis)) + " plane at " +
             std::to_string(plane.position) + " nm does not lie on the mesh");
  }
  return static_cast<long>(rounded);
}

Eigen::Matrix2cd pauli(int axis) {
  Eigen::Matrix2cd s;
  switch (axis) {
    case 0: s << 0, 1, 1, 0; break;
    case 1: s << 0, Cplx(0, -1), Cplx(0, 1), 0; break;
    default: s << 1, 0, 0, -1; break;
  }
  return s;
}

}  // namespace

const char* mirror_name(int normal_axis) {
  require_axis(normal_axis);
  static const char* names[3] = {"sigma_yz", "sigma_xz", "sigma_xy"};
  return names[normal_axis];
}

int ZeroPattern::zero_count() const {
  int count = 0;
  for (const auto& row : zero)
    for (bool z : row) count += z ? 1 : 0;
  return count;
}

ZeroPattern g_pattern(const std::vector<MirrorPlane>& mirrors) {
  ZeroPattern pattern;
  for (const MirrorPlane& m : mirrors) {
    require_axis(m.axis);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (even_zero(m.axis, i, j)) pattern.zero[i][j] = true;
    pattern.sources.push_back(mirror_name(m.axis));
  }
  return pattern;
}

ZeroPattern g_prime_pattern(const std::vector<MirrorPlane>& mirrors,
                            const std::vector<Parity>& drive_parity) {
  if (mirrors.size() != drive_parity.size()) {
    fail(ErrorCode::InvalidConfig,
         "need one drive parity per mirror plane (" +
             std::to_string(mirrors.size()) + " mirrors, " +
             std::to_string(drive_parity.size()) + " parities)");
  }
  ZeroPattern pattern;
  for (size_t m = 0; m < mirrors.size(); ++m) {
    require_axis(mirrors[m].axis);
    if (drive_parity[m] == Parity::None) continue;
    const bool even = drive_parity[m] == Parity::Even;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (even ? even_zero(mirrors[m].axis, i, j)
                 : odd_zero(mirrors[m].axis, i, j))
          pattern.zero[i][j] = true;
    pattern.sources.push_back(std::string(mirror_name(mirrors[m].axis)) +
                              (even ? " (even drive)" : " (odd drive)"));
  }
  return pattern;
}

PatternReport verify_pattern(const Matrix3d& m, const ZeroPattern& pattern,
                             double tol_rel) {
  if (!(tol_rel > 0.0) || tol_rel >= 1.0) {
    fail(ErrorCode::InvalidConfig,
         "relative tolerance must lie in (0, 1), got " +
             std::to_string(tol_rel));
  }
  PatternReport report;
  report.tol_rel = tol_rel;
  const double scale = m.cwiseAbs().maxCoeff();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (!pattern.forbids(i, j)) continue;
      const double ratio = scale > 0.0 ? std::abs(m(i, j)) / scale : 0.0;
      if (ratio > report.worst_ratio) {
        report.worst_ratio = ratio;
        report.worst_row = i;
        report.worst_col = j;
      }
      if (ratio > tol_rel) {
        report.pass = false;
        report.violations.emplace_back(i, j);
      }
    }
  }
  return report;
}

ExtinctionPrediction predict_extinctions(const ZeroPattern& g_pat,
                                         const ZeroPattern& gp_pat) {
  ExtinctionPrediction out;
  out.all_orientations = gp_pat.zero_count() == 9;
  // For B along axis j the Rabi vector is (g e_j) x (g' e_j); component k
  // is u_{i1} v_{i2} - u_{i2} v_{i1} over the cyclic pair (i1, i2).  It is
  // forced to vanish only when the masks kill both products.
  for (int j = 0; j < 3; ++j) {
    bool extinct = true;
    for (int k = 0; k < 3 && extinct; ++k) {
      const int i1 = (k + 1) % 3;
      const int i2 = (k + 2) % 3;
      const bool first = !g_pat.forbids(i1, j) && !gp_pat.forbids(i2, j);
      const bool second = !g_pat.forbids(i2, j) && !gp_pat.forbids(i1, j);
      if (first || second) extinct = false;
    }
    if (extinct) out.axes.push_back(j);
  }
  return out;
}

Matrix3d mirror_field_signs(int normal_axis) {
  require_axis(normal_axis);
  Matrix3d signs = Matrix3d::Identity();
  for (int i = 0; i < 3; ++i)
    if (i != normal_axis) signs(i, i) = -1.0;
  return signs;
}

Eigen::Matrix2cd mirror_spin_rep(int normal_axis) {
  require_axis(normal_axis);
  return Cplx(0, -1) * pauli(normal_axis);
}

Matrix6c mirror_band_rep(int normal_axis) {
  require_axis(normal_axis);
  // J = 3/2 angular momentum in the m = +3/2 .. -3/2 ordering of the basis.
  Eigen::Matrix4cd raise = Eigen::Matrix4cd::Zero();
  const double s3 = std::sqrt(3.0);
  raise(0, 1) = s3;
  raise(1, 2) = 2.0;
  raise(2, 3) = s3;
  Eigen::Matrix4cd j;
  switch (normal_axis) {
    case 0: j = 0.5 * (raise + raise.adjoint()); break;
    case 1: j = Cplx(0, -0.5) * (raise - raise.adjoint()); break;
    default:
      j = Eigen::Vector4cd(1.5, 0.5, -0.5, -1.5).asDiagonal();
      break;
  }
  // Reflection = rotation by pi about the normal composed with inversion;
  // inversion is trivial on p-like bands up to a global phase, leaving
  // exp(-i pi J_a) on each angular momentum block.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(j);
  Eigen::Vector4cd phases;
  for (int k = 0; k < 4; ++k) {
    phases(k) = std::exp(Cplx(0, -std::numbers::pi) * es.eigenvalues()(k));
  }
  Matrix6c rep = Matrix6c::Zero();
  rep.block<4, 4>(0, 0) = es.eigenvectors() * phases.asDiagonal() *
                          es.eigenvectors().adjoint();
  rep.block<2, 2>(4, 4) = mirror_spin_rep(normal_axis);
  return rep;
}

std::vector<MirrorPlane> detect_mirrors(const DeviceModel& device,
                                        const Mesh& mesh) {
  std::vector<MirrorPlane> out;
  const double geom_tol = 1e-9;
  for (int axis = 0; axis < 3; ++axis) {
    if (axis == 0 && device.periodic_x) continue;
    const double position =
        0.5 * (device.bounds.lo[axis] + device.bounds.hi[axis]);
    const double t = 2.0 * (position - mesh.origin[axis]) / mesh.h[axis];
    if (std::abs(t - std::round(t)) > 1e-6) continue;
    if (!strain_allows_mirror(device.strain, axis)) continue;

    bool symmetric = true;
    for (size_t r = 0; r < device.regions.size() && symmetric; ++r) {
      const Box image = reflect_box(device.regions[r].box, axis, position);
      bool matched = false;
      for (size_t s = 0; s < device.regions.size(); ++s) {
        if (!boxes_equal(device.regions[s].box, image, geom_tol)) continue;
        if (device.regions[s].material != device.regions[r].material) continue;
        // The hard-wall region must map onto itself, not a lookalike.
        if ((static_cast<int>(r) == device.channel_index) !=
            (static_cast<int>(s) == device.channel_index))
          continue;
        matched = true;
        break;
      }
      symmetric = matched;
    }
    for (size_t g = 0; g < device.gates.size() && symmetric; ++g) {
      const Box image = reflect_box(device.gates[g].box, axis, position);
      bool matched = false;
      for (size_t s = 0; s < device.gates.size(); ++s) {
        if (boxes_equal(device.gates[s].box, image, geom_tol)) {
          matched = true;
          break;
        }
      }
      symmetric = matched;
    }
    if (symmetric) out.push_back({axis, position});
  }
  return out;
}

VecXc apply_mirror(const Mesh& mesh, const MirrorPlane& plane,
                   const VecXc& state) {
  const long offset = plane_offset(mesh, plane);
  if (state.size() != 6 * mesh.num_channel_nodes()) {
    fail(ErrorCode::MeshMismatch,
         "state has " + std::to_string(state.size()) +
             " entries, mesh channel needs " +
             std::to_string(6 * mesh.num_channel_nodes()));
  }
  const Matrix6c rep = mirror_band_rep(plane.axis);
  VecXc out(state.size());
  for (int64_t c = 0; c < mesh.num_channel_nodes(); ++c) {
    int idx[3];
    mesh.unlin(mesh.channel_nodes[c], idx[0], idx[1], idx[2]);
    const long r = reflected_index(mesh, plane.axis, offset, idx[plane.axis]);
    if (r < 0) {
      fail(ErrorCode::MisalignedMirror,
           std::string(mirror_name(plane.axis)) +
               " reflection leaves the grid");
    }
    idx[plane.axis] = static_cast<int>(r);
    const int64_t source =
        mesh.channel_index[mesh.lin(idx[0], idx[1], idx[2])];
    if (source < 0) {
      fail(ErrorCode::MisalignedMirror,
           std::string(mirror_name(plane.axis)) +
               " does not map the channel onto itself");
    }
    out.segment<6>(6 * c) = rep * state.segment<6>(6 * source);
  }
  return out;
}

Parity scalar_parity(const Mesh& mesh, const std::vector<double>& values,
                     const MirrorPlane& plane, double tol) {
  if (static_cast<int64_t>(values.size()) != mesh.num_nodes()) {
    fail(ErrorCode::MeshMismatch,
         "field has " + std::to_string(values.size()) + " values, mesh has " +
             std::to_string(mesh.num_nodes()) + " nodes");
  }
  const long offset = plane_offset(mesh, plane);
  double norm2 = 0.0, even2 = 0.0, odd2 = 0.0;
  for (int k = 0; k < mesh.n[2]; ++k) {
    for (int j = 0; j < mesh.n[1]; ++j) {
      for (int i = 0; i < mesh.n[0]; ++i) {
        int idx[3] = {i, j, k};
        const long r =
            reflected_index(mesh, plane.axis, offset, idx[plane.axis]);
        if (r < 0) {
          fail(ErrorCode::MisalignedMirror,
               std::string(mirror_name(plane.axis)) +
                   " reflection leaves the grid");
        }
        idx[plane.axis] = static_cast<int>(r);
        const double v = values[mesh.lin(i, j, k)];
        const double vr = values[mesh.lin(idx[0], idx[1], idx[2])];
        norm2 += v * v;
        even2 += (vr - v) * (vr - v);
        odd2 += (vr + v) * (vr + v);
      }
    }
  }
  if (norm2 == 0.0) return Parity::Even;
  if (std::sqrt(even2 / norm2) <= tol) return Parity::Even;
  if (std::sqrt(odd2 / norm2) <= tol) return Parity::Odd;
  return Parity::None;
}

SymmetricDoublet symmetry_adapt(const Mesh& mesh, const MirrorPlane& plane,
                                const VecXc& down, const VecXc& up) {
  const int64_t dim = 6 * mesh.num_channel_nodes();
  if (down.size() != dim || up.size() != dim) {
    fail(ErrorCode::MeshMismatch,
         "doublet dimension does not match the mesh channel");
  }
  const VecXc mirrored_down = apply_mirror(mesh, plane, down);
  const VecXc mirrored_up = apply_mirror(mesh, plane, up);
  Eigen::Matrix2cd s;
  s(0, 0) = down.dot(mirrored_down);
  s(0, 1) = down.dot(mirrored_up);
  s(1, 0) = up.dot(mirrored_down);
  s(1, 1) = up.dot(mirrored_up);

  // An invariant Kramers doublet gives a unitary representative squaring
  // to -1 (half-integer spin).  Anything else means the pair does not span
  // a mirror-invariant subspace.
  const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
  const double defect =
      (s.adjoint() * s - id).norm() + (s * s + id).norm();
  if (defect > 1e-6) {
    fail(ErrorCode::DegenerateSubspaceUnresolved,
         std::string("doublet is not invariant under ") +
             mirror_name(plane.axis) + " (defect " + std::to_string(defect) +
             ")");
  }

  // Coefficients of the -i eigenvector of s from the adjugate of (s + i);
  // the two candidate columns are proportional, so take the better
  // conditioned one.
  const Cplx imag_unit(0, 1);
  Eigen::Vector2cd first(-s(0, 1), s(0, 0) + imag_unit);
  Eigen::Vector2cd second(s(1, 1) + imag_unit, -s(1, 0));
  Eigen::Vector2cd coeff = first.norm() >= second.norm() ? first : second;
  if (coeff.norm() < 1e-8) {
    fail(ErrorCode::DegenerateSubspaceUnresolved,
         "mirror representative has no -i eigenvector");
  }
  coeff.normalize();
  // Fix the free global phase against the first coefficient unless it is
  // small, falling back to the second.  A largest-entry rule would flip the
  // overall sign on near-ties, breaking idempotence for already adapted
  // input.
  const int lead = std::abs(coeff(0)) > 0.1 ? 0 : 1;
  coeff *= std::conj(coeff(lead)) / std::abs(coeff(lead));

  const VecXc down_tmp = coeff(0) * down + coeff(1) * up;
  // T commutes with the mirror, so the Kramers partner is the +i eigenvector.
  const VecXc up_tmp = apply_time_reversal(down_tmp);

  // Rotate the diag(-i, +i) representative onto the standard one for this
  // axis; each rotation is special unitary, so the partner convention
  // up = T down survives.
  Eigen::Matrix2cd q;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  switch (plane.axis) {
    case 0:
      q << inv_sqrt2, -inv_sqrt2, inv_sqrt2, inv_sqrt2;
      break;
    case 1:
      q << inv_sqrt2, Cplx(0, inv_sqrt2), Cplx(0, inv_sqrt2), inv_sqrt2;
      break;
    default:
      q = Eigen::Matrix2cd::Identity();
      break;
  }
  SymmetricDoublet out;
  out.down = q(0, 0) * down_tmp + q(1, 0) * up_tmp;
  out.up = q(0, 1) * down_tmp + q(1, 1) * up_tmp;
  return out;
}

}  // namespace kpg
