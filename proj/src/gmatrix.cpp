#include "kpg/gmatrix.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "kpg/constants.hpp"
#include "kpg/errors.hpp"
#include "kpg/kp.hpp"

namespace kpg {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Vec3 field_direction(double theta_deg, double phi_deg) {
  const double th = theta_deg * kPi / 180.0;
  const double ph = phi_deg * kPi / 180.0;
  return Vec3(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph),
              std::cos(th));
}

std::array<Eigen::MatrixXcd, 3> m1_elements(
    const DeviceModel& device, const Mesh& mesh, const PotentialField& pot,
    const CouplingFlags& flags, const Vec3& gauge_origin,
    const Eigen::MatrixXcd& bra, const Eigen::MatrixXcd& ket, double delta_b) {
  if (delta_b <= 0.0)
    throw Error(ErrorCode::InvalidConfig,
                "field step for magnetic elements must be positive");
  std::array<Eigen::MatrixXcd, 3> out;
  for (int axis = 0; axis < 3; ++axis) {
    Vec3 b = Vec3::Zero();
    b[axis] = delta_b;
    const KpOperator plus =
        assemble(device, mesh, pot, b, flags, gauge_origin);
    const KpOperator minus =
        assemble(device, mesh, pot, -b, flags, gauge_origin);
    // Subtract the operators entrywise before applying them.  The two
    // matrices agree to O(delta_b), so matching entries subtract exactly
    // (Sterbenz) and the unaffected ones cancel to a true zero; the inner
    // products below then accumulate rounding relative to the small
    // difference instead of the full operator norm, which the 1/(2 delta_b)
    // quotient would otherwise amplify into the leading noise of g and g'.
    const SparseC diff = plus.matrix - minus.matrix;
    const Eigen::MatrixXcd dket = diff * ket;
    out[axis].noalias() = bra.adjoint() * dket;
    out[axis] *= Cplx(-1.0 / (2.0 * delta_b), 0.0);
  }
  return out;
}

Matrix3d compute_g(const std::array<Eigen::MatrixXcd, 3>& m) {
  Matrix3d g;
  for (int a = 0; a < 3; ++a) {
    if (m[a].rows() != 2 || m[a].cols() != 2)
      throw Error(ErrorCode::InvalidConfig,
                  "doublet magnetic elements must be 2x2");
    const double scale = -2.0 / constants::mu_b;
    g(0, a) = scale * m[a](0, 1).real();
    g(1, a) = scale * m[a](0, 1).imag();
    g(2, a) = scale * m[a](1, 1).real();
  }
  return g;
}

AlignedDoublet align_doublet(const VecXc& down, const VecXc& up,
                             const VecXc& down_ref, const VecXc& up_ref) {
  if (down.size() != up.size() || down.size() != down_ref.size() ||
      down.size() != up_ref.size())
    throw Error(ErrorCode::MeshMismatch,
                "doublet states must share one dimension");
  // Project each reference state onto the span of the current doublet; the
  // aligned pair then overlaps the reference as a Hermitian positive 2x2
  // block, which makes finite-difference derivatives basis-stable.
  const Cplx cd0 = down.dot(down_ref);
  const Cplx cd1 = up.dot(down_ref);
  const Cplx cu0 = down.dot(up_ref);
  const Cplx cu1 = up.dot(up_ref);
  AlignedDoublet out;
  out.down = cd0 * down + cd1 * up;
  out.up = cu0 * down + cu1 * up;
  out.alpha_down = out.down.norm();
  out.alpha_up = out.up.norm();
  if (out.alpha_down <= 0.5 || out.alpha_up <= 0.5)
    throw Error(ErrorCode::OverlapTooSmall,
                "doublet overlap with the reference dropped to " +
                    std::to_string(std::min(out.alpha_down, out.alpha_up)) +
                    "; bias or field step is too large for alignment");
  // Symmetric (Loewdin) orthonormalization of the projected pair.  Unlike a
  // sequential Gram-Schmidt sweep it treats both members identically, so the
  // aligned doublet transforms exactly covariantly under SU(2) rotations of
  // the reference frame and observables built from it are frame-invariant
  // to roundoff.
  Eigen::Matrix2cd s;
  s(0, 0) = out.down.squaredNorm();
  s(0, 1) = out.down.dot(out.up);
  s(1, 0) = std::conj(s(0, 1));
  s(1, 1) = out.up.squaredNorm();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(s);
  const Eigen::Matrix2cd w = es.eigenvectors() *
                             es.eigenvalues().cwiseSqrt().cwiseInverse()
                                 .asDiagonal() *
                             es.eigenvectors().adjoint();
  const VecXc nd = w(0, 0) * out.down + w(1, 0) * out.up;
  const VecXc nu = w(0, 1) * out.down + w(1, 1) * out.up;
  out.down = nd;
  out.up = nu;
  return out;
}

Matrix3d g_prime_fd(const Matrix3d& g_plus, const Matrix3d& g_minus,
                    double delta_v) {
  if (delta_v <= 0.0)
    throw Error(ErrorCode::InvalidConfig,
                "bias step for the g-matrix derivative must be positive");
  return (g_plus - g_minus) / (2.0 * delta_v);
}

double effective_g(const Matrix3d& g, const Vec3& bhat) {
  const double n = bhat.norm();
  if (n <= 0.0)
    throw Error(ErrorCode::InvalidConfig,
                "field direction must be nonzero");
  return (g * (bhat / n)).norm();
}

RabiResult rabi_from_g(const Matrix3d& g, const Matrix3d& g_prime,
                       const Vec3& bhat, double b_tesla, double v_ac) {
  const double n = bhat.norm();
  if (n <= 0.0)
    throw Error(ErrorCode::InvalidConfig,
                "field direction must be nonzero");
  const Vec3 bh = bhat / n;
  RabiResult out;
  out.g_b = g * bh;
  out.g_prime_b = g_prime * bh;
  out.g_star = out.g_b.norm();
  if (out.g_star < 1e-12)
    throw Error(ErrorCode::ZeroLarmor,
                "effective g-factor vanishes for this field direction");
  out.f_larmor_hz =
      out.g_star * constants::mu_b * b_tesla * constants::mev_to_hz;
  const Vec3 cross = out.g_b.cross(out.g_prime_b);
  out.f_rabi_hz = constants::mu_b * b_tesla * v_ac / (2.0 * out.g_star) *
                  cross.norm() * constants::mev_to_hz;
  return out;
}

PrincipalFactors principal_factors(const Matrix3d& g) {
  Eigen::JacobiSVD<Matrix3d> svd(g,
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
  PrincipalFactors f;
  f.u = svd.matrixU();
  f.v = svd.matrixV();
  f.g_d = svd.singularValues();
  // Push any reflection into the smallest factor so both frames are proper
  // rotations; the sign of g_d[2] then equals the sign of det g.
  if (f.u.determinant() < 0.0) {
    f.u.col(2) *= -1.0;
    f.g_d[2] *= -1.0;
  }
  if (f.v.determinant() < 0.0) {
    f.v.col(2) *= -1.0;
    f.g_d[2] *= -1.0;
  }
  return f;
}

GPrimeSplit split_tmr_izr(const PrincipalFactors& f, const Matrix3d& g_prime) {
  const double largest = std::max(1.0, f.g_d.cwiseAbs().maxCoeff());
  if (f.g_d.cwiseAbs().minCoeff() <= 1e-12 * largest)
    throw Error(ErrorCode::SingularPrincipalFactor,
                "a principal g-factor vanishes; the derivative split is "
                "undefined");
  GPrimeSplit s;
  s.g_prime_frame = f.u.transpose() * g_prime * f.v;
  const Matrix3d d = f.g_d.asDiagonal();
  const Matrix3d gp_sym =
      s.g_prime_frame.transpose() * d + d * s.g_prime_frame;
  s.tmr = 0.5 * f.g_d.cwiseInverse().asDiagonal() * gp_sym;
  s.izr = s.g_prime_frame - s.tmr;
  s.antisym = d * s.izr;
  return s;
}

SeriesResult perturbation_series(const PairedStates& states,
                                 const std::array<Eigen::MatrixXcd, 3>& m1_all,
                                 const Eigen::MatrixXcd& drive_all,
                                 const Vec3& b_tesla, double v_ac,
                                 double degeneracy_tol) {
  const int n_doublets = static_cast<int>(states.energies.size());
  if (n_doublets < 2)
    throw Error(ErrorCode::InvalidConfig,
                "the perturbation series needs at least one excited doublet");
  const int dim = 2 * n_doublets;
  for (const auto& m : m1_all)
    if (m.rows() != dim || m.cols() != dim)
      throw Error(ErrorCode::MeshMismatch,
                  "magnetic element matrix does not match the paired basis");
  if (drive_all.rows() != dim || drive_all.cols() != dim)
    throw Error(ErrorCode::MeshMismatch,
                "drive element matrix does not match the paired basis");
  const double b_mag = b_tesla.norm();
  if (b_mag <= 0.0)
    throw Error(ErrorCode::InvalidConfig,
                "the perturbation series needs a nonzero field");
  const Vec3 bh = b_tesla / b_mag;

  Eigen::MatrixXcd bm = bh[0] * m1_all[0];
  bm.noalias() += bh[1] * m1_all[1];
  bm.noalias() += bh[2] * m1_all[2];

  // Zeroth-order qubit states diagonalize the doublet Zeeman block -b.M1.
  Eigen::Matrix2cd h1 = -bm.block<2, 2>(0, 0);
  h1 = Cplx(0.5, 0.0) * (h1 + h1.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(h1);
  const Eigen::Vector2cd c0 = es.eigenvectors().col(0);
  const Eigen::Vector2cd c1 = es.eigenvectors().col(1);

  const double prefactor = b_mag * v_ac * constants::mev_to_hz;
  const double e0 = states.energies[0];
  SeriesResult out;
  out.contributions_hz.reserve(n_doublets - 1);
  Cplx sum(0.0, 0.0);
  for (int n = 1; n < n_doublets; ++n) {
    const double denom = e0 - states.energies[n];
    if (std::abs(denom) < degeneracy_tol * std::max(1.0, std::abs(e0)))
      throw Error(ErrorCode::DegenerateExcitedState,
                  "excited doublet " + std::to_string(n) +
                      " is degenerate with the qubit doublet");
    const Eigen::Matrix2cd drive_0n = drive_all.block<2, 2>(0, 2 * n);
    const Eigen::Matrix2cd drive_n0 = drive_all.block<2, 2>(2 * n, 0);
    const Eigen::Matrix2cd bm_0n = bm.block<2, 2>(0, 2 * n);
    const Eigen::Matrix2cd bm_n0 = bm.block<2, 2>(2 * n, 0);
    const Cplx term = (c1.adjoint() * drive_0n * bm_n0 * c0).value() / denom +
                      (c1.adjoint() * bm_0n * drive_n0 * c0).value() / denom;
    sum += term;
    out.contributions_hz.push_back(std::abs(term) * prefactor);
  }
  out.f_rabi_hz = std::abs(sum) * prefactor;
  return out;
}

double rabi_direct(const KpOperator& op_at_b, const SparseC& drive,
                   double v_ac, uint64_t seed) {
  if (drive.rows() != op_at_b.dim() || drive.cols() != op_at_b.dim())
    throw Error(ErrorCode::MeshMismatch,
                "drive operator does not match the Hamiltonian dimension");
  const EigenSet set = solve_top_states(op_at_b, 1, seed);
  const Cplx elem =
      (set.vectors.col(1).adjoint() * drive * set.vectors.col(0)).value();
  return std::abs(elem) * v_ac * constants::mev_to_hz;
}

}  // namespace kpg
