#include "kpg/reference.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "kpg/constants.hpp"
#include "kpg/errors.hpp"

namespace kpg {

Vec3 pure_hh_g(double kappa) { return {0.0, 0.0, -6.0 * kappa}; }

Vec3 pure_lh_g(double kappa) {
  return {-4.0 * kappa, -4.0 * kappa, -2.0 * kappa};
}

double delta_gz(double gamma1, double gamma2, double gamma3) {
  const double denom = 3.0 * gamma1 + 10.0 * gamma2;
  if (denom <= 0.0) {
    fail(ErrorCode::DegenerateDenominator,
         "3 gamma1 + 10 gamma2 must be positive, got " +
             std::to_string(denom));
  }
  const double pi2 = std::numbers::pi * std::numbers::pi;
  return 131072.0 * gamma3 * gamma3 / (81.0 * pi2 * pi2 * denom);
}

double bulk_mass_001(const MaterialParams& m, bool heavy) {
  const double curvature =
      heavy ? m.gamma1 - 2.0 * m.gamma2 : m.gamma1 + 2.0 * m.gamma2;
  if (curvature <= 0.0) {
    fail(ErrorCode::DegenerateDenominator,
         "band curvature gamma1 -+ 2 gamma2 must be positive, got " +
             std::to_string(curvature));
  }
  return 1.0 / curvature;
}

double brute_force_rabi(const KpOperator& op_at_b, const SparseC& drive,
                        double v_ac) {
  if (drive.rows() != op_at_b.dim() || drive.cols() != op_at_b.dim()) {
    fail(ErrorCode::MeshMismatch,
         "drive operator dimension does not match the Hamiltonian");
  }
  const EigenSet set = dense_solve(op_at_b);
  const Cplx element =
      set.vectors.col(1).adjoint() * (drive * set.vectors.col(0));
  return std::abs(element) * v_ac * constants::mev_to_hz;
}

}  // namespace kpg
