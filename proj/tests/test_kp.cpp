#include <cmath>
#include <complex>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "kpg/constants.hpp"
#include "kpg/kp.hpp"
#include "kpg/poisson.hpp"

using namespace kpg;
namespace cn = kpg::constants;

namespace {

const Cplx I1{0.0, 1.0};

MaterialParams scalar_material() {
  MaterialParams m;
  m.name = "scalar";
  m.gamma1 = 1.0;
  m.gamma2 = 0.0;
  m.gamma3 = 0.0;
  m.kappa = 0.0;
  m.delta_so = 0.0;
  m.permittivity = 11.7;
  m.semiconductor = true;
  return m;
}

PotentialField zero_potential(const Mesh& mesh) {
  PotentialField pot;
  pot.values.assign(static_cast<size_t>(mesh.num_nodes()), 0.0);
  return pot;
}

Eigen::MatrixXcd dense(const SparseC& h) { return Eigen::MatrixXcd(h); }

// Big time-reversal operator acting per node.
Eigen::MatrixXcd big_time_reversal(int64_t nodes) {
  const Matrix6c u = time_reversal_matrix();
  Eigen::MatrixXcd big = Eigen::MatrixXcd::Zero(6 * nodes, 6 * nodes);
  for (int64_t n = 0; n < nodes; ++n) {
    big.block(6 * n, 6 * n, 6, 6) = u;
  }
  return big;
}

std::vector<double> sorted_eigs(const Eigen::MatrixXcd& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  std::vector<double> v(es.eigenvalues().data(),
                        es.eigenvalues().data() + es.eigenvalues().size());
  return v;  // ascending
}

}  // namespace

TEST_SUITE("kp") {

TEST_CASE("unit constants match their catalog values") {
  CHECK(cn::hbar2_over_2m0 == doctest::Approx(38.0998).epsilon(1e-4));
  CHECK(cn::mu_b == doctest::Approx(5.7883818e-2).epsilon(1e-7));
  CHECK(cn::e_over_hbar == doctest::Approx(1.51926745e-3).epsilon(1e-7));
  CHECK(cn::mev_to_hz == doctest::Approx(2.41798924e11).epsilon(1e-7));
}

TEST_CASE("six-band block reproduces the frozen reference matrix") {
  const double p = 1.5, q = -0.7, delta = 44.0;
  const Cplx r{0.3, 0.4}, s{-0.2, 0.1};
  const Matrix6c a = six_band_block(p, q, r, s, delta);

  Matrix6c e = Matrix6c::Zero();
  e(0, 0) = 0.8;
  e(1, 1) = 2.2;
  e(2, 2) = 2.2;
  e(3, 3) = 0.8;
  e(4, 4) = 45.5;
  e(5, 5) = 45.5;
  e(0, 1) = Cplx(0.2, -0.1);
  e(0, 2) = Cplx(0.3, 0.4);
  e(0, 3) = 0.0;
  e(0, 4) = Cplx(-0.14142135623730953, 0.07071067811865477);
  e(0, 5) = Cplx(-0.42426406871192857, -0.565685424949238);
  e(1, 2) = 0.0;
  e(1, 3) = Cplx(0.3, 0.4);
  e(1, 4) = Cplx(-0.9899494936611666, 0.0);
  e(1, 5) = Cplx(0.2449489742783178, -0.1224744871391589);
  e(2, 3) = Cplx(-0.2, 0.1);
  e(2, 4) = Cplx(0.2449489742783178, 0.1224744871391589);
  e(2, 5) = Cplx(0.9899494936611666, 0.0);
  e(3, 4) = Cplx(0.42426406871192857, -0.565685424949238);
  e(3, 5) = Cplx(-0.14142135623730953, -0.07071067811865477);
  e(4, 5) = 0.0;
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) e(j, i) = std::conj(e(i, j));

  CHECK((a - e).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("six-band block is Hermitian for arbitrary invariants") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix6c a = six_band_block(u(rng), u(rng), {u(rng), u(rng)},
                                      {u(rng), u(rng)}, u(rng));
    CHECK((a - a.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("kinetic coefficient matrices rebuild the bulk Hamiltonian") {
  const MaterialParams si = silicon();
  const KineticCoefficients kc =
      kinetic_coefficients(si.gamma1, si.gamma2, si.gamma3);
  const double hb2 = cn::hbar2_over_2m0;
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (int trial = 0; trial < 8; ++trial) {
    const Vec3 k{u(rng), u(rng), u(rng)};
    Matrix6c a = Matrix6c::Zero();
    const double kk[3] = {k.x(), k.y(), k.z()};
    for (int axis = 0; axis < 3; ++axis) {
      a += (hb2 * kk[axis] * kk[axis]) * kc.p[axis];
    }
    a += (hb2 * kk[0] * kk[1]) * kc.c[0];
    a += (hb2 * kk[0] * kk[2]) * kc.c[1];
    a += (hb2 * kk[1] * kk[2]) * kc.c[2];
    a(4, 4) += si.delta_so;
    a(5, 5) += si.delta_so;
    const Matrix6c direct = bulk_kp_matrix(k, si);
    CHECK((direct - (-a)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("bulk spectrum at the zone center is the band-edge pattern") {
  const MaterialParams si = silicon();
  const auto ev = sorted_eigs(bulk_kp_matrix(Vec3::Zero(), si));
  REQUIRE(ev.size() == 6);
  CHECK(ev[0] == doctest::Approx(-44.0).epsilon(1e-12));
  CHECK(ev[1] == doctest::Approx(-44.0).epsilon(1e-12));
  for (int i = 2; i < 6; ++i) CHECK(std::abs(ev[i]) < 1e-12);
}

TEST_CASE("heavy-hole branch along the growth axis is exactly parabolic") {
  const MaterialParams si = silicon();
  const double hb2 = cn::hbar2_over_2m0;
  const double kz = 0.3;
  const auto ev = sorted_eigs(bulk_kp_matrix({0.0, 0.0, kz}, si));
  const double ehh = -hb2 * (si.gamma1 - 2.0 * si.gamma2) * kz * kz;
  // The +-3/2 components decouple along z, so the top doublet is exact.
  CHECK(ev[5] == doctest::Approx(ehh).epsilon(1e-12));
  CHECK(ev[4] == doctest::Approx(ehh).epsilon(1e-12));
}

TEST_CASE("light-hole curvature along the growth axis matches gamma1+2gamma2") {
  const MaterialParams si = silicon();
  const double hb2 = cn::hbar2_over_2m0;
  const double kz = 1e-3;
  const auto ev = sorted_eigs(bulk_kp_matrix({0.0, 0.0, kz}, si));
  const double elh = -hb2 * (si.gamma1 + 2.0 * si.gamma2) * kz * kz;
  CHECK(ev[3] == doctest::Approx(elh).epsilon(1e-5));
  CHECK(ev[2] == doctest::Approx(elh).epsilon(1e-5));
}

TEST_CASE("gamma3 override reroutes only the gamma3 channels") {
  MaterialParams tweaked = silicon();
  tweaked.gamma3 = 0.9;
  CouplingFlags flags;
  flags.gamma3_override = 0.9;
  const Vec3 k{0.4, -0.2, 0.3};
  const Matrix6c a = bulk_kp_matrix(k, silicon(), flags);
  const Matrix6c b = bulk_kp_matrix(k, tweaked);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("Zeeman matrices restrict to the angular momentum algebra") {
  const double kappa = -0.42;
  const double kpp = 1.0 + 2.0 * kappa;
  const auto k = bloch_k_matrices(kappa);

  for (int axis = 0; axis < 3; ++axis) {
    CHECK((k[axis] - k[axis].adjoint()).cwiseAbs().maxCoeff() < 1e-14);
  }

  // Spin-3/2 matrices in the m = +3/2..-3/2 ordering, built from ladder
  // operators independently of the production code.
  using M4 = Eigen::Matrix<Cplx, 4, 4>;
  const double h3 = std::sqrt(3.0) / 2.0;
  M4 jx = M4::Zero(), jy = M4::Zero(), jz = M4::Zero();
  jx(0, 1) = jx(1, 0) = h3;
  jx(1, 2) = jx(2, 1) = 1.0;
  jx(2, 3) = jx(3, 2) = h3;
  jy(0, 1) = -I1 * h3;
  jy(1, 0) = I1 * h3;
  jy(1, 2) = -I1;
  jy(2, 1) = I1;
  jy(2, 3) = -I1 * h3;
  jy(3, 2) = I1 * h3;
  jz.diagonal() << 1.5, 0.5, -0.5, -1.5;
  REQUIRE(((jx * jy - jy * jx) - I1 * jz).cwiseAbs().maxCoeff() < 1e-14);

  const M4 top[3] = {k[0].topLeftCorner<4, 4>(), k[1].topLeftCorner<4, 4>(),
                     k[2].topLeftCorner<4, 4>()};
  CHECK((top[0] - (-2.0 * kappa) * jx).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((top[1] - (-2.0 * kappa) * jy).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((top[2] - (-2.0 * kappa) * jz).cwiseAbs().maxCoeff() < 1e-14);

  using M2 = Eigen::Matrix<Cplx, 2, 2>;
  M2 sx, sy, sz;
  sx << 0, 1, 1, 0;
  sy << 0, -I1, I1, 0;
  sz << 1, 0, 0, -1;
  const M2 so[3] = {k[0].bottomRightCorner<2, 2>(),
                    k[1].bottomRightCorner<2, 2>(),
                    k[2].bottomRightCorner<2, 2>()};
  CHECK((so[0] - (-kpp) * sx).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((so[1] - (-kpp) * sy).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((so[2] - (-kpp) * sz).cwiseAbs().maxCoeff() < 1e-14);

  // The J=3/2 / split-off mixing blocks must be present (kappa' terms).
  CHECK(std::abs(k[0](0, 4)) > 0.1);
  CHECK(std::abs(k[2](1, 4)) > 0.1);
}

TEST_CASE("Zeeman coupling carries the frozen heavy-hole moment") {
  const MaterialParams si = silicon();
  const Matrix6c hz = bloch_zeeman({0.0, 0.0, 1.0}, si);
  // K_z(0,0) = -3*kappa = +1.26 for kappa = -0.42.
  CHECK(hz(0, 0).real() == doctest::Approx(cn::mu_b * 1.26).epsilon(1e-12));
  CHECK(hz(3, 3).real() == doctest::Approx(-cn::mu_b * 1.26).epsilon(1e-12));
  const Matrix6c hx = bloch_zeeman({1.0, 0.0, 0.0}, si);
  // K_x(0,1) = -sqrt(3)*kappa = +0.7274613391789284.
  CHECK(hx(0, 1).real() ==
        doctest::Approx(cn::mu_b * 0.7274613391789284).epsilon(1e-12));
  CHECK(std::abs(hx(0, 1).imag()) < 1e-15);
}

TEST_CASE("strain block: hydrostatic silence, biaxial splitting, shear") {
  const MaterialParams si = silicon();

  StrainTensor hydro;
  hydro.xx = hydro.yy = hydro.zz = 1e-3;
  CHECK(strain_hamiltonian(hydro, si).cwiseAbs().maxCoeff() < 1e-12);

  const StrainTensor bi = biaxial_strain(1e-3, si);
  const Matrix6c hb = strain_hamiltonian(bi, si);
  const double qeps = 3.719277108433735;  // meV for 0.1% tensile in silicon
  CHECK(hb(0, 0).real() == doctest::Approx(-qeps).epsilon(1e-10));
  CHECK(hb(1, 1).real() == doctest::Approx(qeps).epsilon(1e-10));
  CHECK(hb(2, 2).real() == doctest::Approx(qeps).epsilon(1e-10));
  CHECK(hb(3, 3).real() == doctest::Approx(-qeps).epsilon(1e-10));
  CHECK(std::abs(hb(4, 4)) < 1e-12);
  CHECK(std::abs(hb(1, 4) - Cplx(-std::sqrt(2.0) * qeps, 0.0)) < 1e-9);
  CHECK(std::abs(hb(0, 2)) < 1e-12);

  StrainTensor sxy;
  sxy.xy = 1e-3;
  const Matrix6c hxy = strain_hamiltonian(sxy, si);
  CHECK(std::abs(hxy(0, 2) - Cplx(0.0, -4.8)) < 1e-12);
  CHECK(std::abs(hxy(0, 0)) < 1e-12);

  StrainTensor sxz;
  sxz.xz = 1e-3;
  const Matrix6c hxz = strain_hamiltonian(sxz, si);
  CHECK(std::abs(hxz(0, 1) - Cplx(4.8, 0.0)) < 1e-12);
  CHECK(std::abs(hxz(2, 3) - Cplx(-4.8, 0.0)) < 1e-12);

  StrainTensor syz;
  syz.yz = 1e-3;
  const Matrix6c hyz = strain_hamiltonian(syz, si);
  CHECK(std::abs(hyz(0, 1) - Cplx(0.0, -4.8)) < 1e-12);
}

TEST_CASE("biaxial strain sign selects the hole species at the band edge") {
  const MaterialParams si = silicon();

  const StrainTensor tens = biaxial_strain(1e-3, si);
  Eigen::SelfAdjointEigenSolver<Matrix6c> es(
      bulk_kp_matrix(Vec3::Zero(), si, CouplingFlags{}, &tens));
  auto top = es.eigenvectors().col(5);
  const double lh_so = std::norm(top(1)) + std::norm(top(2)) +
                       std::norm(top(4)) + std::norm(top(5));
  CHECK(lh_so > 0.999);  // tensile film: light holes (with split-off) on top

  const StrainTensor comp = biaxial_strain(-1e-3, si);
  Eigen::SelfAdjointEigenSolver<Matrix6c> es2(
      bulk_kp_matrix(Vec3::Zero(), si, CouplingFlags{}, &comp));
  auto top2 = es2.eigenvectors().col(5);
  const double hh = std::norm(top2(0)) + std::norm(top2(3));
  CHECK(hh > 0.999);  // compressive film: heavy holes on top
}

TEST_CASE("time reversal operator squares to minus the identity") {
  const Matrix6c u = time_reversal_matrix();
  CHECK((u * u.conjugate() + Matrix6c::Identity()).cwiseAbs().maxCoeff() <
        1e-15);
  CHECK((u * u.adjoint() - Matrix6c::Identity()).cwiseAbs().maxCoeff() <
        1e-15);
}

TEST_CASE("Peierls phases: modulus, zero field and plaquette flux") {
  const Vec3 origin{0.0, 0.0, 0.0};
  CHECK(std::abs(peierls_phase({1, 2, 3}, {2, 2, 3}, Vec3::Zero(), origin) -
                 Cplx(1.0, 0.0)) < 1e-15);

  const Vec3 b{0.3, -0.4, 0.7};
  const Cplx ph = peierls_phase({1, 2, 3}, {2, 2, 3}, b, origin);
  CHECK(std::abs(std::abs(ph) - 1.0) < 1e-15);

  // Flux through an hx-by-hy rectangle in the xy plane.
  const double hx = 0.9, hy = 1.3, bz = 0.7;
  const Vec3 bfield{0.0, 0.0, bz};
  auto loop = [&](const Vec3& o) {
    const Vec3 p0{2.0, -1.0, 0.5}, p1{2.0 + hx, -1.0, 0.5},
        p2{2.0 + hx, -1.0 + hy, 0.5}, p3{2.0, -1.0 + hy, 0.5};
    return peierls_phase(p0, p1, bfield, o) * peierls_phase(p1, p2, bfield, o) *
           peierls_phase(p2, p3, bfield, o) * peierls_phase(p3, p0, bfield, o);
  };
  const Cplx expected = std::polar(1.0, -cn::e_over_hbar * bz * hx * hy);
  CHECK(std::abs(loop(origin) - expected) < 1e-13);
  CHECK(std::abs(loop({5.0, -3.0, 2.0}) - expected) < 1e-13);  // gauge shift
}

TEST_CASE("assembled operator is Hermitian and deterministic") {
  DeviceSpec spec = test::bare_box(6.0, 4.0, 3.0);
  spec.mesh_spacing = 1.0;
  const DeviceModel dev = build_device(spec);
  const Mesh mesh = build_mesh(dev, spec.mesh_spacing);
  PotentialField pot = zero_potential(mesh);
  for (int64_t n = 0; n < mesh.num_nodes(); ++n) {
    int i, j, k;
    mesh.unlin(n, i, j, k);
    const Vec3 r = mesh.node_pos(i, j, k);
    pot.values[n] = 0.01 * std::sin(0.7 * r.x()) * std::cos(0.3 * r.z());
  }
  const Vec3 b{0.2, 0.5, -0.3};
  const KpOperator op = assemble(dev, mesh, pot, b);
  CHECK(op.hermiticity_error() < 1e-14);

  const KpOperator op2 = assemble(dev, mesh, pot, b);
  CHECK(dense(op.matrix - op2.matrix).cwiseAbs().maxCoeff() == 0.0);
  std::ostringstream s1, s2;
  op.dump_coo(s1);
  op2.dump_coo(s2);
  CHECK(s1.str() == s2.str());
}

TEST_CASE("zero-field Hamiltonian commutes with time reversal") {
  DeviceSpec spec = test::bare_box(6.0, 4.0, 3.0);
  spec.biaxial_eps_parallel = 1e-3;
  const DeviceModel dev = build_device(spec);
  const Mesh mesh = build_mesh(dev, 1.0);
  PotentialField pot = zero_potential(mesh);
  for (int64_t n = 0; n < mesh.num_nodes(); ++n) {
    int i, j, k;
    mesh.unlin(n, i, j, k);
    pot.values[n] = -0.02 * std::exp(-0.1 * mesh.node_pos(i, j, k).squaredNorm());
  }
  const KpOperator op = assemble(dev, mesh, pot, Vec3::Zero());
  const Eigen::MatrixXcd h = dense(op.matrix);
  const Eigen::MatrixXcd t = big_time_reversal(mesh.num_channel_nodes());
  const double err = (t * h.conjugate() * t.adjoint() - h).cwiseAbs().maxCoeff();
  CHECK(err < 1e-12 * h.cwiseAbs().maxCoeff());
}

TEST_CASE("time reversal maps the Hamiltonian at B to the one at -B") {
  DeviceSpec spec = test::bare_box(6.0, 4.0, 3.0);
  const DeviceModel dev = build_device(spec);
  const Mesh mesh = build_mesh(dev, 1.0);
  const PotentialField pot = zero_potential(mesh);
  const Vec3 b{0.4, -0.3, 0.6};
  const Vec3 origin{0.3, -0.2, 1.4};
  const KpOperator hp = assemble(dev, mesh, pot, b, CouplingFlags{}, origin);
  const KpOperator hm = assemble(dev, mesh, pot, -b, CouplingFlags{}, origin);
  const Eigen::MatrixXcd t = big_time_reversal(mesh.num_channel_nodes());
  const Eigen::MatrixXcd lhs = t * dense(hp.matrix).conjugate() * t.adjoint();
  const double scale = dense(hp.matrix).cwiseAbs().maxCoeff();
  CHECK((lhs - dense(hm.matrix)).cwiseAbs().maxCoeff() < 1e-12 * scale);
}

TEST_CASE("changing the gauge origin is a diagonal unitary rotation") {
  DeviceSpec spec = test::bare_box(6.0, 4.0, 3.0);
  const DeviceModel dev = build_device(spec);
  const Mesh mesh = build_mesh(dev, 1.0);
  const PotentialField pot = zero_potential(mesh);
  const Vec3 b{0.2, 0.7, -0.4};
  const Vec3 o1{0.0, 0.0, 1.5}, o2{4.0, -2.0, 3.0};
  const KpOperator h1 = assemble(dev, mesh, pot, b, CouplingFlags{}, o1);
  const KpOperator h2 = assemble(dev, mesh, pot, b, CouplingFlags{}, o2);

  const Vec3 c = 0.5 * b.cross(o1 - o2);  // A_o2 - A_o1, a constant field
  const int64_t nc = mesh.num_channel_nodes();
  Eigen::VectorXcd g(6 * nc);
  for (int64_t ord = 0; ord < nc; ++ord) {
    int i, j, k;
    mesh.unlin(mesh.channel_nodes[ord], i, j, k);
    const Cplx phase =
        std::polar(1.0, -cn::e_over_hbar * c.dot(mesh.node_pos(i, j, k)));
    for (int band = 0; band < 6; ++band) g(6 * ord + band) = phase;
  }
  const Eigen::MatrixXcd transformed =
      g.asDiagonal() * dense(h1.matrix) * g.conjugate().asDiagonal();
  const double scale = dense(h1.matrix).cwiseAbs().maxCoeff();
  CHECK((transformed - dense(h2.matrix)).cwiseAbs().maxCoeff() < 1e-12 * scale);
}

TEST_CASE("decoupled-band limit reproduces the exact hard-wall spectrum") {
  DeviceSpec spec = test::bare_box(6.0, 4.0, 3.0);
  spec.materials["scalar"] = scalar_material();
  spec.regions[0].material = "scalar";
  const DeviceModel dev = build_device(spec);
  const Mesh mesh = build_mesh(dev, 1.0);
  const PotentialField pot = zero_potential(mesh);
  const KpOperator op = assemble(dev, mesh, pot, Vec3::Zero());
  REQUIRE(mesh.num_channel_nodes() == 5 * 3 * 2);

  const auto got = sorted_eigs(dense(op.matrix));
  std::vector<double> want;
  const double hb2 = cn::hbar2_over_2m0;
  auto mode = [&](int n, int cells, double h) {
    return 2.0 * (1.0 - std::cos(M_PI * n / cells)) / (h * h);
  };
  for (int nx = 1; nx <= 5; ++nx)
    for (int ny = 1; ny <= 3; ++ny)
      for (int nz = 1; nz <= 2; ++nz) {
        const double e =
            -hb2 * (mode(nx, 6, 1.0) + mode(ny, 4, 1.0) + mode(nz, 3, 1.0));
        for (int band = 0; band < 6; ++band) want.push_back(e);
      }
  std::sort(want.begin(), want.end());
  REQUIRE(got.size() == want.size());
  for (size_t idx = 0; idx < want.size(); ++idx) {
    CHECK(got[idx] == doctest::Approx(want[idx]).epsilon(1e-10));
  }
}

TEST_CASE("periodic axis reproduces the exact ring spectrum") {
  DeviceSpec spec = test::bare_box(8.0, 3.0, 3.0);
  spec.materials["scalar"] = scalar_material();
  spec.regions[0].material = "scalar";
  spec.periodic_x = true;
  const DeviceModel dev = build_device(spec);
  const Mesh mesh = build_mesh(dev, 1.0);
  REQUIRE(mesh.periodic_x);
  REQUIRE(mesh.n[0] == 8);
  const PotentialField pot = zero_potential(mesh);
  const KpOperator op = assemble(dev, mesh, pot, Vec3::Zero());
  REQUIRE(mesh.num_channel_nodes() == 8 * 2 * 2);

  const auto got = sorted_eigs(dense(op.matrix));
  std::vector<double> want;
  const double hb2 = cn::hbar2_over_2m0;
  for (int m = 0; m < 8; ++m)
    for (int ny = 1; ny <= 2; ++ny)
      for (int nz = 1; nz <= 2; ++nz) {
        const double ring = 2.0 * (1.0 - std::cos(2.0 * M_PI * m / 8.0));
        const double wy = 2.0 * (1.0 - std::cos(M_PI * ny / 3.0));
        const double wz = 2.0 * (1.0 - std::cos(M_PI * nz / 3.0));
        const double e = -hb2 * (ring + wy + wz);
        for (int band = 0; band < 6; ++band) want.push_back(e);
      }
  std::sort(want.begin(), want.end());
  REQUIRE(got.size() == want.size());
  for (size_t idx = 0; idx < want.size(); ++idx) {
    CHECK(got[idx] == doctest::Approx(want[idx]).epsilon(1e-10));
  }
}

TEST_CASE("potential enters as the electron charge times the local voltage") {
  DeviceSpec spec = test::bare_box(6.0, 4.0, 3.0);
  const DeviceModel dev = build_device(spec);
  const Mesh mesh = build_mesh(dev, 1.0);
  PotentialField pot = zero_potential(mesh);
  const KpOperator base = assemble(dev, mesh, pot, Vec3::Zero());
  for (auto& v : pot.values) v = -0.05;  // uniform -50 mV
  const KpOperator shifted = assemble(dev, mesh, pot, Vec3::Zero());
  // A uniform -50 mV gate shift raises every hole level by +50 meV.
  const Eigen::MatrixXcd diff = dense(shifted.matrix - base.matrix);
  const Eigen::MatrixXcd expect =
      50.0 * Eigen::MatrixXcd::Identity(base.dim(), base.dim());
  CHECK((diff - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gate coupling operator is the diagonal drive term") {
  DeviceSpec spec = test::bare_box(6.0, 4.0, 3.0);
  const DeviceModel dev = build_device(spec);
  const Mesh mesh = build_mesh(dev, 1.0);
  std::vector<double> d1(static_cast<size_t>(mesh.num_nodes()));
  for (size_t n = 0; n < d1.size(); ++n) d1[n] = 1e-3 * double(n % 17);
  const SparseC op = gate_coupling_operator(mesh, d1);
  REQUIRE(op.rows() == 6 * mesh.num_channel_nodes());
  const Eigen::MatrixXcd d = dense(op);
  for (int64_t ord = 0; ord < mesh.num_channel_nodes(); ++ord) {
    const double want = -1000.0 * d1[mesh.channel_nodes[ord]];
    for (int band = 0; band < 6; ++band) {
      CHECK(d(6 * ord + band, 6 * ord + band).real() ==
            doctest::Approx(want).epsilon(1e-14));
    }
  }
  CHECK(d.cwiseAbs().sum() ==
        doctest::Approx(d.diagonal().cwiseAbs().sum()).epsilon(1e-14));

  std::vector<double> bad(3, 0.0);
  CHECK(test::thrown_code([&] { gate_coupling_operator(mesh, bad); }) ==
        ErrorCode::MeshMismatch);
}

TEST_CASE("gauge origin defaults to the potential-weighted channel centroid") {
  DeviceSpec spec = test::bare_box(6.0, 4.0, 3.0);
  const DeviceModel dev = build_device(spec);
  const Mesh mesh = build_mesh(dev, 1.0);
  PotentialField pot = zero_potential(mesh);
  const Vec3 flat = default_gauge_origin(mesh, pot);
  CHECK(std::abs(flat.x()) < 1e-12);
  CHECK(std::abs(flat.y()) < 1e-12);
  CHECK(flat.z() == doctest::Approx(1.5).epsilon(1e-12));

  // A strongly negative pocket near one corner pulls the origin there.
  const Vec3 target{2.0, 1.0, 2.0};
  for (int64_t n = 0; n < mesh.num_nodes(); ++n) {
    int i, j, k;
    mesh.unlin(n, i, j, k);
    pot.values[n] = -0.5 * std::exp(-(mesh.node_pos(i, j, k) - target)
                                         .squaredNorm());
  }
  const Vec3 peaked = default_gauge_origin(mesh, pot);
  CHECK((peaked - target).norm() < 1.0);
}

TEST_CASE("mismatched potential sampling is rejected") {
  DeviceSpec spec = test::bare_box(6.0, 4.0, 3.0);
  const DeviceModel dev = build_device(spec);
  const Mesh mesh = build_mesh(dev, 1.0);
  PotentialField pot;
  pot.values.assign(5, 0.0);
  CHECK(test::thrown_code(
            [&] { assemble(dev, mesh, pot, Vec3::Zero()); }) ==
        ErrorCode::MeshMismatch);
}

TEST_CASE("spectral upper bound certifies the dense spectrum") {
  DeviceSpec spec = test::bare_box(6.0, 4.0, 3.0);
  spec.biaxial_eps_parallel = 2e-3;
  const DeviceModel dev = build_device(spec);
  const Mesh mesh = build_mesh(dev, 1.0);
  PotentialField pot = zero_potential(mesh);
  for (int64_t n = 0; n < mesh.num_nodes(); ++n) pot.values[n] = -0.08;
  const KpOperator op = assemble(dev, mesh, pot, {0.3, 0.2, 0.8});
  const auto ev = sorted_eigs(dense(op.matrix));
  CHECK(ev.back() < op.spectral_upper_bound);
  // The bound ignores the (negative) kinetic part, so its slack is roughly
  // the confinement energy of this very small box.
  CHECK(op.spectral_upper_bound - ev.back() < 500.0);
}

}  // TEST_SUITE
