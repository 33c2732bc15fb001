#pragma once

#include <array>
#include <vector>

#include "kpg/spectrum.hpp"

namespace kpg {

using Matrix3d = Eigen::Matrix3d;

// Unit magnetic-field direction from polar angle theta (from +z) and azimuth
// phi (from +x), both in degrees.
Vec3 field_direction(double theta_deg, double phi_deg);

// Matrix elements <bra_i| M1_a |ket_j> of the magnetic moment operator
// M1 = -dH/dB, evaluated by central finite differences of the assembled
// Hamiltonian at +-delta_b tesla along each axis.  The same gauge origin is
// used for every assembly so the elements are gauge-consistent.
std::array<Eigen::MatrixXcd, 3> m1_elements(
    const DeviceModel& device, const Mesh& mesh, const PotentialField& pot,
    const CouplingFlags& flags, const Vec3& gauge_origin,
    const Eigen::MatrixXcd& bra, const Eigen::MatrixXcd& ket, double delta_b);

// g-matrix of a Kramers doublet from its 2x2 magnetic elements
// (m[a](i,j) = <s_i|M1_a|s_j> with s_0 = down, s_1 = up):
//   row 1:  -2/muB Re<down|M1_a|up>
//   row 2:  -2/muB Im<down|M1_a|up>
//   row 3:  -2/muB   <up|M1_a|up>
Matrix3d compute_g(const std::array<Eigen::MatrixXcd, 3>& m);

// Rotates a doublet inside its own span so that it overlaps the reference
// doublet as an identity matrix times a positive scalar.  Throws
// OverlapTooSmall when either projected norm drops to 0.5 or below.
struct AlignedDoublet {
  VecXc down, up;
  double alpha_down = 0.0, alpha_up = 0.0;  // projected norms
};
AlignedDoublet align_doublet(const VecXc& down, const VecXc& up,
                             const VecXc& down_ref, const VecXc& up_ref);

// Central difference of two aligned g-matrices at V0 +- delta_v.
Matrix3d g_prime_fd(const Matrix3d& g_plus, const Matrix3d& g_minus,
                    double delta_v);

// Effective g-factor for a field direction: g* = |g bhat|.
double effective_g(const Matrix3d& g, const Vec3& bhat);

// Larmor and Rabi frequencies from the g-matrix pair:
//   f_L = g* mu_B B / h
//   f_R = mu_B B V_ac / (2 h g*) |(g bhat) x (g' bhat)|
// Throws ZeroLarmor when g* vanishes.
struct RabiResult {
  double g_star = 0.0;
  double f_larmor_hz = 0.0;
  double f_rabi_hz = 0.0;
  Vec3 g_b = Vec3::Zero();        // g bhat
  Vec3 g_prime_b = Vec3::Zero();  // g' bhat, per volt
};
RabiResult rabi_from_g(const Matrix3d& g, const Matrix3d& g_prime,
                       const Vec3& bhat, double b_tesla, double v_ac);

// Signed singular value decomposition g = U diag(g_d) V^T with proper
// rotations (det U = det V = +1).  |g_d| is sorted descending and the sign
// of the last factor equals the sign of det g.
struct PrincipalFactors {
  Matrix3d u = Matrix3d::Identity();
  Matrix3d v = Matrix3d::Identity();
  Vec3 g_d = Vec3::Zero();
};
PrincipalFactors principal_factors(const Matrix3d& g);

// Splits the g-matrix derivative, expressed in the principal frame
// (gp_frame = U^T g' V), into the part visible in the Zeeman tensor
// derivative (tmr = g_d^-1 G'/2 with G' = t(gp) g_d + g_d gp) and the
// iso-Zeeman remainder izr = gp_frame - tmr, which factors exactly as
// g_d^-1 times an antisymmetric matrix.  Throws SingularPrincipalFactor
// when a principal g-factor vanishes.
struct GPrimeSplit {
  Matrix3d g_prime_frame = Matrix3d::Zero();
  Matrix3d tmr = Matrix3d::Zero();
  Matrix3d izr = Matrix3d::Zero();
  Matrix3d antisym = Matrix3d::Zero();  // diag(g_d) * izr
};
GPrimeSplit split_tmr_izr(const PrincipalFactors& f, const Matrix3d& g_prime);

// First-order perturbation series for the Rabi frequency over the excited
// doublets (doublet 0 is the qubit):
//   f_R = B V_ac/h |sum_n [ <1|eD|n><n|b.M1|0> + <1|b.M1|n><n|eD|0> ]
//                          / (E0 - En) |
// `m1_all` and `drive_all` are element matrices in the paired basis
// [down_0, up_0, down_1, up_1, ...]; the drive is in meV per volt.
// Throws DegenerateExcitedState when an excited level collides with E0.
struct SeriesResult {
  double f_rabi_hz = 0.0;
  std::vector<double> contributions_hz;  // |partial term| per excited doublet
};
SeriesResult perturbation_series(const PairedStates& states,
                                 const std::array<Eigen::MatrixXcd, 3>& m1_all,
                                 const Eigen::MatrixXcd& drive_all,
                                 const Vec3& b_tesla, double v_ac,
                                 double degeneracy_tol = 1e-9);

// Rabi frequency from the exact bias-derivative matrix element between the
// two topmost eigenstates of a finite-field Hamiltonian (the defining
// expression, all orders in B).
double rabi_direct(const KpOperator& op_at_b, const SparseC& drive,
                   double v_ac, uint64_t seed = 1);

}  // namespace kpg
