#pragma once

#include <cstdint>
#include <string>

#include "kpg/kp.hpp"
#include "kpg/materials.hpp"
#include "kpg/spectrum.hpp"

namespace kpg {

// A named oracle value for invariant reports: what was evaluated, how, and a
// hash of the inputs it was evaluated for.
struct OracleResult {
  std::string quantity;
  double value = 0.0;
  std::string method;  // "closed-form" or "dense-diagonalization"
  uint64_t inputs_hash = 0;
};

// Principal g-factors of ideal doublets built from single Bloch functions:
// a pure heavy hole couples only through B_z, a pure light hole through all
// components with double weight in the plane.
Vec3 pure_hh_g(double kappa);  // (0, 0, -6 kappa)
Vec3 pure_lh_g(double kappa);  // (-4 kappa, -4 kappa, -2 kappa)

// Correction to g_z of a heavy hole confined in a hard-wall box much thinner
// along z than along x and y, from the lowest light-hole admixture:
//   delta_g_z = 2^17 gamma3^2 / (81 pi^4 (3 gamma1 + 10 gamma2)).
// Throws DegenerateDenominator when 3 gamma1 + 10 gamma2 is not positive.
double delta_gz(double gamma1, double gamma2, double gamma3);

// Closed-form band-edge masses along [001] of the bulk model, in units of
// m0: heavy 1/(gamma1 - 2 gamma2), light 1/(gamma1 + 2 gamma2).
double bulk_mass_001(const MaterialParams& m, bool heavy);

// Rabi frequency from the drive matrix element between the two topmost
// states of a finite-field Hamiltonian, via a full dense diagonalization:
// first order in the drive amplitude, all orders in B.  Dimension capped
// like dense_solve (DimensionTooLarge).
double brute_force_rabi(const KpOperator& op_at_b, const SparseC& drive,
                        double v_ac);

}  // namespace kpg
