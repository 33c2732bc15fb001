#include "kpg/kp.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "kpg/constants.hpp"
#include "kpg/errors.hpp"

namespace kpg {

namespace {
constexpr Cplx kI{0.0, 1.0};
}

Matrix6c six_band_block(double p, double q, Cplx r, Cplx s, double delta) {
  const double sq2 = std::sqrt(2.0);
  const double sq32 = std::sqrt(1.5);
  Matrix6c a = Matrix6c::Zero();
  a(0, 0) = p + q;
  a(1, 1) = p - q;
  a(2, 2) = p - q;
  a(3, 3) = p + q;
  a(4, 4) = p + delta;
  a(5, 5) = p + delta;
  a(0, 1) = -s;
  a(0, 2) = r;
  a(0, 4) = s / sq2;
  a(0, 5) = -sq2 * r;
  a(1, 3) = r;
  a(1, 4) = sq2 * q;
  a(1, 5) = -sq32 * s;
  a(2, 3) = s;
  a(2, 4) = -sq32 * std::conj(s);
  a(2, 5) = -sq2 * q;
  a(3, 4) = sq2 * std::conj(r);
  a(3, 5) = std::conj(s) / sq2;
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) a(j, i) = std::conj(a(i, j));
  return a;
}

KineticCoefficients kinetic_coefficients(double gamma1, double gamma2,
                                         double gamma3) {
  const double s3 = std::sqrt(3.0);
  KineticCoefficients k;
  // Coefficients of k_x^2, k_y^2, k_z^2 in (P, Q, R, S).
  k.p[0] = six_band_block(gamma1, gamma2, -s3 * gamma3, 0.0, 0.0);
  k.p[1] = six_band_block(gamma1, gamma2, +s3 * gamma3, 0.0, 0.0);
  k.p[2] = six_band_block(gamma1, -2.0 * gamma2, 0.0, 0.0, 0.0);
  // Coefficients of k_x k_y, k_x k_z, k_y k_z.
  k.c[0] = six_band_block(0.0, 0.0, 2.0 * s3 * kI * gamma2, 0.0, 0.0);
  k.c[1] = six_band_block(0.0, 0.0, 0.0, 2.0 * s3 * gamma3, 0.0);
  k.c[2] = six_band_block(0.0, 0.0, 0.0, -2.0 * s3 * kI * gamma3, 0.0);
  return k;
}

Matrix6c bulk_kp_matrix(const Vec3& k, const MaterialParams& m,
                        const CouplingFlags& flags,
                        const StrainTensor* strain) {
  const double hb2 = constants::hbar2_over_2m0;
  const double g3 = flags.gamma3_override.value_or(m.gamma3);
  const double kx = k.x(), ky = k.y(), kz = k.z();
  const double p = hb2 * m.gamma1 * k.squaredNorm();
  const double q = hb2 * m.gamma2 * (kx * kx + ky * ky - 2.0 * kz * kz);
  const Cplx r = hb2 * std::sqrt(3.0) *
                 Cplx(-g3 * (kx * kx - ky * ky), 2.0 * m.gamma2 * kx * ky);
  const Cplx s = hb2 * 2.0 * std::sqrt(3.0) * g3 * Cplx(kx, -ky) * kz;
  Matrix6c h = -six_band_block(p, q, r, s, m.delta_so);
  if (strain != nullptr && flags.strain_on && !strain->is_zero()) {
    h += strain_hamiltonian(*strain, m);
  }
  return h;
}

std::array<Matrix6c, 3> bloch_k_matrices(double kappa) {
  const double kp = 1.0 + kappa;
  const double kpp = 1.0 + 2.0 * kappa;
  const double s3 = std::sqrt(3.0);
  const double s32 = std::sqrt(1.5);
  const double s2 = std::sqrt(2.0);

  Eigen::Matrix<double, 6, 6> x = Eigen::Matrix<double, 6, 6>::Zero();
  x(0, 1) = s3 * kappa;
  x(1, 2) = 2.0 * kappa;
  x(2, 3) = s3 * kappa;
  x(0, 4) = -s32 * kp;
  x(1, 5) = -kp / s2;
  x(2, 4) = kp / s2;
  x(3, 5) = s32 * kp;
  x(4, 5) = kpp;
  Eigen::Matrix<double, 6, 6> xs = x + x.transpose();

  Eigen::Matrix<double, 6, 6> y = Eigen::Matrix<double, 6, 6>::Zero();
  y(0, 1) = s3 * kappa;
  y(1, 2) = 2.0 * kappa;
  y(2, 3) = s3 * kappa;
  y(0, 4) = -s32 * kp;
  y(1, 5) = -kp / s2;
  y(2, 4) = -kp / s2;
  y(3, 5) = -s32 * kp;
  y(4, 5) = kpp;
  Eigen::Matrix<double, 6, 6> ya = y - y.transpose();

  Eigen::Matrix<double, 6, 6> z = Eigen::Matrix<double, 6, 6>::Zero();
  z(0, 0) = 3.0 * kappa;
  z(1, 1) = kappa;
  z(2, 2) = -kappa;
  z(3, 3) = -3.0 * kappa;
  z(4, 4) = kpp;
  z(5, 5) = -kpp;
  z(1, 4) = s2 * kp;
  z(2, 5) = s2 * kp;
  Eigen::Matrix<double, 6, 6> zs =
      Eigen::Matrix<double, 6, 6>(z + z.transpose()) -
      Eigen::Matrix<double, 6, 6>(z.diagonal().asDiagonal());

  std::array<Matrix6c, 3> out;
  out[0] = -xs.cast<Cplx>();
  out[1] = kI * ya.cast<Cplx>();
  out[2] = -zs.cast<Cplx>();
  return out;
}

Matrix6c bloch_zeeman(const Vec3& b_tesla, const MaterialParams& m) {
  const auto k = bloch_k_matrices(m.kappa);
  return constants::mu_b *
         (b_tesla.x() * k[0] + b_tesla.y() * k[1] + b_tesla.z() * k[2]);
}

Matrix6c strain_hamiltonian(const StrainTensor& eps, const MaterialParams& m) {
  const double bv = m.b_v * constants::ev_to_mev;
  const double dv = m.d_v * constants::ev_to_mev;
  const double q = -(bv / 2.0) * (eps.xx + eps.yy - 2.0 * eps.zz);
  const Cplx r(std::sqrt(3.0) / 2.0 * bv * (eps.xx - eps.yy), -dv * eps.xy);
  const Cplx s = -dv * Cplx(eps.xz, -eps.yz);
  return -six_band_block(0.0, q, r, s, 0.0);
}

Matrix6c time_reversal_matrix() {
  Matrix6c u = Matrix6c::Zero();
  u(3, 0) = 1.0;
  u(2, 1) = -1.0;
  u(1, 2) = 1.0;
  u(0, 3) = -1.0;
  u(5, 4) = 1.0;
  u(4, 5) = -1.0;
  return u;
}

Cplx peierls_phase(const Vec3& from, const Vec3& to, const Vec3& b_tesla,
                   const Vec3& gauge_origin) {
  const Vec3 mid = 0.5 * (from + to) - gauge_origin;
  const Vec3 a = 0.5 * b_tesla.cross(mid);
  const double phi = -constants::e_over_hbar * a.dot(to - from);
  return std::polar(1.0, phi);
}

Vec3 default_gauge_origin(const Mesh& mesh, const PotentialField& pot) {
  if (mesh.channel_nodes.empty()) {
    fail(ErrorCode::SpacingTooCoarse,
         "channel region contains no interior mesh nodes");
  }
  double umax = -std::numeric_limits<double>::infinity();
  for (int64_t node : mesh.channel_nodes) {
    umax = std::max(umax, -1000.0 * pot.values[node]);
  }
  // Soft-max weighting concentrates the origin where the hole potential
  // energy peaks; with a flat potential it reduces to the channel centroid.
  const double soft = 5.0;  // meV
  Vec3 acc = Vec3::Zero();
  double wsum = 0.0;
  for (int64_t node : mesh.channel_nodes) {
    int i, j, k;
    mesh.unlin(node, i, j, k);
    const double u = -1000.0 * pot.values[node];
    const double w = std::exp((u - umax) / soft);
    acc += w * mesh.node_pos(i, j, k);
    wsum += w;
  }
  return acc / wsum;
}

double KpOperator::hermiticity_error() const {
  const SparseC adj = SparseC(matrix.adjoint());
  const double scale = std::max(1.0, matrix.norm());
  return SparseC(matrix - adj).norm() / scale;
}

void KpOperator::dump_coo(std::ostream& os) const {
  os << "# kp-operator dim=" << dim() << " nnz=" << matrix.nonZeros() << "\n";
  os.precision(17);
  for (int outer = 0; outer < matrix.outerSize(); ++outer) {
    for (SparseC::InnerIterator it(matrix, outer); it; ++it) {
      os << it.row() << ' ' << it.col() << ' ' << it.value().real() << ' '
         << it.value().imag() << '\n';
    }
  }
}

SparseC gate_coupling_operator(const Mesh& mesh,
                               const std::vector<double>& d1) {
  if (static_cast<int64_t>(d1.size()) != mesh.num_nodes()) {
    fail(ErrorCode::MeshMismatch,
         "unit-response field is not sampled on the solver mesh");
  }
  const int64_t nc = mesh.num_channel_nodes();
  SparseC op(6 * nc, 6 * nc);
  std::vector<Eigen::Triplet<Cplx>> trip;
  trip.reserve(static_cast<size_t>(6 * nc));
  for (int64_t ord = 0; ord < nc; ++ord) {
    const double u = -1000.0 * d1[mesh.channel_nodes[ord]];
    if (u == 0.0) continue;
    for (int band = 0; band < 6; ++band) {
      trip.emplace_back(6 * ord + band, 6 * ord + band, Cplx(u, 0.0));
    }
  }
  op.setFromTriplets(trip.begin(), trip.end());
  return op;
}

KpOperator assemble(const DeviceModel& device, const Mesh& mesh,
                    const PotentialField& pot, const Vec3& b_tesla,
                    const CouplingFlags& flags,
                    std::optional<Vec3> gauge_origin) {
  if (static_cast<int64_t>(pot.values.size()) != mesh.num_nodes()) {
    fail(ErrorCode::MeshMismatch,
         "potential field is not sampled on the solver mesh");
  }
  const int64_t nc = mesh.num_channel_nodes();
  if (nc == 0) {
    fail(ErrorCode::SpacingTooCoarse,
         "channel region contains no interior mesh nodes");
  }

  const MaterialParams m = device.channel_material();
  const double g3 = flags.gamma3_override.value_or(m.gamma3);
  const KineticCoefficients kin =
      kinetic_coefficients(m.gamma1, m.gamma2, g3);
  const bool has_field = b_tesla.norm() > 0.0;
  const bool use_phase = flags.peierls_on && has_field;
  const bool use_zeeman = flags.bloch_zeeman_on && has_field;
  const Vec3 origin =
      gauge_origin ? *gauge_origin : default_gauge_origin(mesh, pot);

  Matrix6c const_block = Matrix6c::Zero();
  const_block(4, 4) -= m.delta_so;
  const_block(5, 5) -= m.delta_so;
  if (use_zeeman) const_block += bloch_zeeman(b_tesla, m);
  const bool with_strain = flags.strain_on && !device.strain.is_zero();
  if (with_strain) const_block += strain_hamiltonian(device.strain, m);

  const double hb2 = constants::hbar2_over_2m0;
  std::vector<Eigen::Triplet<Cplx>> trip;
  trip.reserve(static_cast<size_t>(nc) * 280);
  double bound = -std::numeric_limits<double>::infinity();

  auto add_block = [&trip](int64_t row_node, int64_t col_node,
                           const Matrix6c& blk) {
    for (int r = 0; r < 6; ++r) {
      for (int c = 0; c < 6; ++c) {
        const Cplx v = blk(r, c);
        if (v != 0.0) trip.emplace_back(6 * row_node + r, 6 * col_node + c, v);
      }
    }
  };

  struct Pair {
    int a, b, idx;
  };
  constexpr Pair kPairs[3] = {{0, 1, 0}, {0, 2, 1}, {1, 2, 2}};

  for (int64_t ord = 0; ord < nc; ++ord) {
    const int64_t node = mesh.channel_nodes[ord];
    int i, j, k;
    mesh.unlin(node, i, j, k);
    const Vec3 rc = mesh.node_pos(i, j, k);

    Matrix6c onsite = const_block;
    onsite += (-1000.0 * pot.values[node]) * Matrix6c::Identity();
    {
      // Spectral bound from the non-kinetic block only: the discrete kinetic
      // form is negative semi-definite under the overall sign convention.
      Eigen::SelfAdjointEigenSolver<Matrix6c> es(onsite,
                                                 Eigen::EigenvaluesOnly);
      bound = std::max(bound, es.eigenvalues().maxCoeff());
    }

    for (int a = 0; a < 3; ++a) {
      const double w = hb2 / (mesh.h[a] * mesh.h[a]);
      onsite -= 2.0 * w * kin.p[a];
      for (int sgn : {+1, -1}) {
        int d[3] = {0, 0, 0};
        d[a] = sgn;
        const int64_t nb = mesh.channel_neighbor(i, j, k, d[0], d[1], d[2]);
        if (nb < 0) continue;  // hard wall: the amplitude vanishes outside
        const Vec3 disp(d[0] * mesh.h[0], d[1] * mesh.h[1], d[2] * mesh.h[2]);
        const Cplx ph =
            use_phase ? peierls_phase(rc + disp, rc, b_tesla, origin)
                      : Cplx(1.0, 0.0);
        add_block(ord, mesh.channel_index[nb], (w * ph) * kin.p[a]);
      }
    }

    for (const Pair& pr : kPairs) {
      const double w4 = hb2 / (4.0 * mesh.h[pr.a] * mesh.h[pr.b]);
      for (int sa : {+1, -1}) {
        for (int sb : {+1, -1}) {
          int d[3] = {0, 0, 0};
          d[pr.a] = sa;
          d[pr.b] = sb;
          const int64_t nb = mesh.channel_neighbor(i, j, k, d[0], d[1], d[2]);
          if (nb < 0) continue;
          const Vec3 disp(d[0] * mesh.h[0], d[1] * mesh.h[1],
                          d[2] * mesh.h[2]);
          const Cplx ph =
              use_phase ? peierls_phase(rc + disp, rc, b_tesla, origin)
                        : Cplx(1.0, 0.0);
          add_block(ord, mesh.channel_index[nb],
                    (sa * sb * w4 * ph) * kin.c[pr.idx]);
        }
      }
    }

    add_block(ord, ord, onsite);
  }

  KpOperator op;
  op.matrix.resize(6 * nc, 6 * nc);
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  op.matrix.makeCompressed();
  op.mesh = &mesh;
  op.material = m;
  op.b_field = b_tesla;
  op.gauge_origin = origin;
  op.flags = flags;
  op.strain = with_strain ? device.strain : StrainTensor{};
  op.spectral_upper_bound = bound + 5.0;
  return op;
}

}  // namespace kpg
