#pragma once

#include <cstdint>
#include <vector>

#include "kpg/kp.hpp"

namespace kpg {

// Eigenpairs of a device Hamiltonian, sorted by descending eigenvalue so the
// hole ground state comes first.
struct EigenSet {
  Eigen::VectorXd values;    // meV
  Eigen::MatrixXcd vectors;  // orthonormal columns, aligned with `values`
  int iterations = 0;        // block steps used (0 for the dense path)
  double max_residual = 0.0;
  double shift = 0.0;        // spectral shift used by the iterative solver
};

// Top `num_pairs` Kramers doublets (2*num_pairs states) via shift-invert
// block Lanczos with full reorthogonalization.  The shift is placed just
// above the spectrum: a cheap Lanczos estimate refines the certified
// assembly bound, and positive definiteness of (shift*I - H) is verified on
// the LDLT factor before use.  Deterministic for a fixed seed.
// Throws NotConverged if the Krylov budget is exhausted or residuals stay
// above `tol * spectral spread`.
EigenSet solve_top_states(const KpOperator& op, int num_pairs,
                          uint64_t seed = 1, int max_iterations = 400,
                          double tol = 1e-9);

// Dense reference diagonalization (LAPACK zheevd).  Returns the full
// spectrum; dimensions above 12000 throw DimensionTooLarge.
EigenSet dense_solve(const KpOperator& op);

// Applies the antiunitary time-reversal operator node by node.
Eigen::VectorXcd apply_time_reversal(const Eigen::VectorXcd& state);

// Eigenstates grouped into time-reversal doublets with the convention
// up = T down (up to the free global phase of `down`, which is fixed
// deterministically).  Throws UnpairedState when adjacent eigenvalues do
// not pair within `tol`, or when the time-reversal partner of a member
// leaves the doublet subspace.
struct PairedStates {
  Eigen::VectorXd energies;        // one per doublet, descending
  Eigen::MatrixXcd down, up;       // columns indexed by doublet
  std::vector<double> splittings;  // |E_a - E_b| per doublet (diagnostic)
};
PairedStates pair_kramers(const EigenSet& states, double tol = 1e-6);

}  // namespace kpg
