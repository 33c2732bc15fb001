#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <complex>
#include <iosfwd>
#include <optional>

#include "kpg/coupling.hpp"
#include "kpg/device.hpp"
#include "kpg/mesh.hpp"
#include "kpg/poisson.hpp"

namespace kpg {

using Cplx = std::complex<double>;
using Matrix6c = Eigen::Matrix<Cplx, 6, 6>;
using VecXc = Eigen::VectorXcd;
using SparseC = Eigen::SparseMatrix<Cplx>;

// Basis ordering used throughout:
//   0: |3/2,+3/2>  1: |3/2,+1/2>  2: |3/2,-1/2>  3: |3/2,-3/2>
//   4: |1/2,+1/2>  5: |1/2,-1/2>
// Energies are in meV, lengths in nm, magnetic fields in tesla.  The valence
// band edge of the unstrained semiconductor sits at zero energy; confined hole
// levels have negative energies and the hole ground state is the eigenvalue
// closest to zero, i.e. the largest algebraic one.

// Hermitian 6x6 valence block assembled from the scalar invariants P, Q, R, S
// and the spin-orbit splitting Delta.  This is the matrix inside the overall
// minus sign of the bulk Hamiltonian: H_bulk = -six_band_block(...).
Matrix6c six_band_block(double p, double q, Cplx r, Cplx s, double delta);

// Bulk Hamiltonian at wave vector k (units 1/nm), including the spin-orbit
// splitting and, optionally, homogeneous strain.  B = 0.
Matrix6c bulk_kp_matrix(const Vec3& k, const MaterialParams& m,
                        const CouplingFlags& flags = CouplingFlags{},
                        const StrainTensor* strain = nullptr);

// Coefficient matrices of the kinetic quadratic form: the bulk block equals
//   sum_a p[a]*hb2*k_a^2 + sum_{a<b} c[ab]*hb2*k_a*k_b  (+ Delta terms),
// with pair order c[0]=(x,y), c[1]=(x,z), c[2]=(y,z).  All six matrices are
// Hermitian; gamma3 may be overridden independently of the material.
struct KineticCoefficients {
  std::array<Matrix6c, 3> p;
  std::array<Matrix6c, 3> c;
};
KineticCoefficients kinetic_coefficients(double gamma1, double gamma2,
                                         double gamma3);

// Zeeman coupling of the Bloch functions: H = mu_B B.K in meV.
std::array<Matrix6c, 3> bloch_k_matrices(double kappa);
Matrix6c bloch_zeeman(const Vec3& b_tesla, const MaterialParams& m);

// Bir-Pikus strain Hamiltonian in meV (deformation potentials are stored in
// eV).  The hydrostatic shift is absorbed into the band-edge reference.
Matrix6c strain_hamiltonian(const StrainTensor& eps, const MaterialParams& m);

// Time reversal acts as  psi -> U_T conj(psi)  with U_T real, U_T^2 = -1.
Matrix6c time_reversal_matrix();

// Peierls phase attached to a hopping from `from` to `to` (nm) in a uniform
// field B (tesla) with symmetric gauge A = B x (r - origin) / 2:
//   exp(-i (e/hbar) A(midpoint) . (to - from)).
Cplx peierls_phase(const Vec3& from, const Vec3& to, const Vec3& b_tesla,
                   const Vec3& gauge_origin);

// Potential-weighted centroid of the channel, used as the default gauge
// origin so that Peierls phases stay small where the hole is localized.
Vec3 default_gauge_origin(const Mesh& mesh, const PotentialField& pot);

// Discretized device Hamiltonian over the channel nodes (dimension
// 6 * num_channel_nodes).  Unknown ordering: node-major, the 6 band
// amplitudes of channel node c occupy rows 6c..6c+5.
struct KpOperator {
  SparseC matrix;
  const Mesh* mesh = nullptr;  // non-owning
  MaterialParams material;
  Vec3 b_field = Vec3::Zero();
  Vec3 gauge_origin = Vec3::Zero();
  CouplingFlags flags;
  StrainTensor strain;
  // Certified upper bound on the largest eigenvalue: the kinetic part is
  // negative semi-definite, so max over nodes of the top eigenvalue of the
  // non-kinetic 6x6 block bounds the spectrum from above.
  double spectral_upper_bound = 0.0;

  int64_t dim() const { return matrix.rows(); }
  void apply(const VecXc& x, VecXc& y) const { y = matrix * x; }
  double hermiticity_error() const;
  void dump_coo(std::ostream& os) const;
};

// Derivative of the Hamiltonian with respect to one gate voltage: a diagonal
// operator -e*d1(r) over the channel, where d1 (volts per volt) is the
// unit-response potential of that gate.
SparseC gate_coupling_operator(const Mesh& mesh, const std::vector<double>& d1);

// Assembles the k.p Hamiltonian for a device at the given electrostatic
// potential and magnetic field.  The potential must be sampled on `mesh`
// (MeshMismatch otherwise).  When no gauge origin is supplied the
// potential-weighted channel centroid is used.
KpOperator assemble(const DeviceModel& device, const Mesh& mesh,
                    const PotentialField& pot, const Vec3& b_tesla,
                    const CouplingFlags& flags = CouplingFlags{},
                    std::optional<Vec3> gauge_origin = std::nullopt);

}  // namespace kpg
