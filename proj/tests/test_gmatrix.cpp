#include <cmath>
#include <complex>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "kpg/constants.hpp"
#include "kpg/gmatrix.hpp"
#include "kpg/kp.hpp"

using namespace kpg;

namespace {

PotentialField zero_potential(const Mesh& mesh) {
  PotentialField pot;
  pot.values.assign(static_cast<size_t>(mesh.num_nodes()), 0.0);
  return pot;
}

Eigen::MatrixXcd random_columns(int rows, int cols, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  Eigen::MatrixXcd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = Cplx(dist(rng), dist(rng));
  return m;
}

// <s_i| -mu_B K_a |s_j> for a pair of six-component spinors.
std::array<Eigen::MatrixXcd, 3> zeeman_elements(const Matrix6c& kx,
                                                const Matrix6c& ky,
                                                const Matrix6c& kz,
                                                const VecXc& down,
                                                const VecXc& up) {
  const std::array<const Matrix6c*, 3> k = {&kx, &ky, &kz};
  std::array<Eigen::MatrixXcd, 3> m;
  Eigen::MatrixXcd basis(6, 2);
  basis.col(0) = down;
  basis.col(1) = up;
  for (int a = 0; a < 3; ++a)
    m[a] = -constants::mu_b * (basis.adjoint() * (*k[a]) * basis);
  return m;
}

}  // namespace

TEST_SUITE_BEGIN("gmatrix");

TEST_CASE("field direction covers the coordinate axes") {
  CHECK((field_direction(0.0, 0.0) - Vec3(0, 0, 1)).norm() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK((field_direction(90.0, 0.0) - Vec3(1, 0, 0)).norm() < 1e-14);
  CHECK((field_direction(90.0, 90.0) - Vec3(0, 1, 0)).norm() < 1e-14);
  CHECK(field_direction(63.0, 37.0).norm() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("pure heavy-hole doublet reproduces the textbook g-matrix") {
  const auto k = bloch_k_matrices(silicon().kappa);
  VecXc down = VecXc::Zero(6), up = VecXc::Zero(6);
  down(3) = Cplx(-1.0, 0.0);  // -|3/2,-3/2>
  up(0) = Cplx(1.0, 0.0);     //  |3/2,+3/2>
  // The pair follows the library convention up = T down.
  CHECK((apply_time_reversal(down) - up).norm() < 1e-15);

  const Matrix3d g = compute_g(zeeman_elements(k[0], k[1], k[2], down, up));
  Matrix3d expected = Matrix3d::Zero();
  expected(2, 2) = 2.52;  // 6|kappa| with kappa = -0.42
  CHECK((g - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pure light-hole doublet reproduces the textbook g-matrix") {
  const auto k = bloch_k_matrices(silicon().kappa);
  VecXc down = VecXc::Zero(6), up = VecXc::Zero(6);
  down(2) = Cplx(1.0, 0.0);  // |3/2,-1/2>
  up(1) = Cplx(1.0, 0.0);    // |3/2,+1/2>
  CHECK((apply_time_reversal(down) - up).norm() < 1e-15);

  const Matrix3d g = compute_g(zeeman_elements(k[0], k[1], k[2], down, up));
  Matrix3d expected = Matrix3d::Zero();
  expected(0, 0) = 1.68;  // 4|kappa|
  expected(1, 1) = 1.68;
  expected(2, 2) = 0.84;  // 2|kappa|
  CHECK((g - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("finite-difference magnetic elements match the analytic Zeeman operator") {
  const DeviceModel dev = build_device(test::bare_box(4.0, 3.0, 3.0));
  const Mesh mesh = build_mesh(dev, 1.0);
  const PotentialField pot = zero_potential(mesh);
  const int64_t dim = 6 * mesh.num_channel_nodes();
  REQUIRE(dim == 72);

  CouplingFlags flags;
  flags.peierls_on = false;  // H then depends on B through the Bloch part only
  const Eigen::MatrixXcd bra = random_columns(static_cast<int>(dim), 2, 7);
  const Eigen::MatrixXcd ket = random_columns(static_cast<int>(dim), 3, 8);
  const auto m = m1_elements(dev, mesh, pot, flags, Vec3::Zero(), bra, ket, 1e-3);

  const auto k = bloch_k_matrices(dev.channel_material().kappa);
  for (int a = 0; a < 3; ++a) {
    Eigen::MatrixXcd y(dim, ket.cols());
    for (int64_t node = 0; node < mesh.num_channel_nodes(); ++node)
      y.middleRows(6 * node, 6) = k[a] * ket.middleRows(6 * node, 6);
    const Eigen::MatrixXcd expected = -constants::mu_b * (bra.adjoint() * y);
    CHECK(m[a].rows() == 2);
    CHECK(m[a].cols() == 3);
    // Floor set by catastrophic cancellation over the unnormalized columns:
    // ||H|| eps ||bra|| ||ket|| / (2 delta_b) is a few 1e-9 here.
    CHECK((m[a] - expected).cwiseAbs().maxCoeff() < 1e-8);
  }

  CHECK(test::thrown_code([&] {
          m1_elements(dev, mesh, pot, flags, Vec3::Zero(), bra, ket, 0.0);
        }) == ErrorCode::InvalidConfig);
}

TEST_CASE("magnetic elements over one doublet are hermitian with orbital coupling on") {
  const DeviceModel dev = build_device(test::bare_box(4.0, 3.0, 3.0));
  const Mesh mesh = build_mesh(dev, 1.0);
  const PotentialField pot = zero_potential(mesh);
  Eigen::MatrixXcd basis = random_columns(static_cast<int>(6 * mesh.num_channel_nodes()), 2, 11);
  // Orthonormalize so the sandwich of a hermitian operator is hermitian.
  basis.col(0).normalize();
  basis.col(1) -= basis.col(0) * basis.col(0).dot(basis.col(1));
  basis.col(1).normalize();
  const auto m = m1_elements(dev, mesh, pot, CouplingFlags{}, Vec3(0.5, -0.25, 1.0),
                             basis, basis, 1e-4);
  // The finite-difference cancellation noise scales like ||H|| eps / delta_b.
  for (int a = 0; a < 3; ++a)
    CHECK((m[a] - m[a].adjoint()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("doublet alignment undoes a random rotation inside the span") {
  const int dim = 40;
  Eigen::MatrixXcd ref = random_columns(dim, 2, 21);
  ref.col(0).normalize();
  ref.col(1) -= ref.col(0) * ref.col(0).dot(ref.col(1));
  ref.col(1).normalize();

  std::mt19937_64 rng(22);
  std::normal_distribution<double> dist;
  Cplx a(dist(rng), dist(rng)), b(dist(rng), dist(rng));
  const double n = std::sqrt(std::norm(a) + std::norm(b));
  a /= n;
  b /= n;
  const VecXc down2 = a * ref.col(0) + b * ref.col(1);
  const VecXc up2 = -std::conj(b) * ref.col(0) + std::conj(a) * ref.col(1);

  const AlignedDoublet al = align_doublet(down2, up2, ref.col(0), ref.col(1));
  CHECK(al.alpha_down == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(al.alpha_up == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((al.down - ref.col(0)).norm() < 1e-12);
  CHECK((al.up - ref.col(1)).norm() < 1e-12);

  // Overlaps with the reference are positive multiples of the identity.
  const Cplx cross = al.up.dot(ref.col(0));
  CHECK(std::abs(cross) < 1e-12);
  const Cplx diag = al.down.dot(ref.col(0));
  CHECK(diag.imag() < 1e-12);
  CHECK(diag.real() > 0.99);
}

TEST_CASE("doublet alignment rejects references outside the span") {
  Eigen::MatrixXcd cols = random_columns(30, 4, 31);
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(cols);
  const Eigen::MatrixXcd q =
      qr.householderQ() * Eigen::MatrixXcd::Identity(30, 4);
  CHECK(test::thrown_code([&] {
          align_doublet(q.col(0), q.col(1), q.col(2), q.col(3));
        }) == ErrorCode::OverlapTooSmall);
  CHECK(test::thrown_code([&] {
          align_doublet(q.col(0), q.col(1), q.col(2).head(10), q.col(3).head(10));
        }) == ErrorCode::MeshMismatch);
}

TEST_CASE("principal factors form proper rotations with the sign in the smallest entry") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> dist;
  for (int trial = 0; trial < 4; ++trial) {
    Matrix3d g;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) g(i, j) = dist(rng);
    const PrincipalFactors f = principal_factors(g);
    CHECK((f.u * f.u.transpose() - Matrix3d::Identity()).norm() < 1e-12);
    CHECK((f.v * f.v.transpose() - Matrix3d::Identity()).norm() < 1e-12);
    CHECK(f.u.determinant() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(f.v.determinant() == doctest::Approx(1.0).epsilon(1e-10));
    const Matrix3d rebuilt = f.u * f.g_d.asDiagonal() * f.v.transpose();
    CHECK((rebuilt - g).norm() < 1e-12);
    CHECK(std::abs(f.g_d[0]) >= std::abs(f.g_d[1]));
    CHECK(std::abs(f.g_d[1]) >= std::abs(f.g_d[2]));
    CHECK(f.g_d[0] >= 0.0);
    CHECK(f.g_d[1] >= 0.0);
    CHECK(f.g_d[2] * g.determinant() >= 0.0);
  }
}

TEST_CASE("derivative split separates the symmetric-tensor and iso-Zeeman parts") {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> dist;
  Matrix3d g, gp;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      g(i, j) = dist(rng) + (i == j ? 2.0 : 0.0);  // keep it well conditioned
      gp(i, j) = dist(rng);
    }
  const PrincipalFactors f = principal_factors(g);
  const GPrimeSplit s = split_tmr_izr(f, gp);

  CHECK((s.g_prime_frame - f.u.transpose() * gp * f.v).norm() < 1e-12);
  CHECK((s.tmr + s.izr - s.g_prime_frame).norm() < 1e-13);
  // The iso-Zeeman part is an inverse principal factor times an exactly
  // antisymmetric matrix; the tensor part carries the symmetric remainder.
  CHECK((s.antisym + s.antisym.transpose()).norm() < 1e-13);
  const Matrix3d d = f.g_d.asDiagonal();
  CHECK((d * s.tmr - (d * s.tmr).transpose()).norm() < 1e-13);

  // Cross-check against the derivative of G = g^T g for the linear family
  // g(t) = g + t gp, for which the central difference is exact.
  const double step = 1e-3;
  const Matrix3d g_plus = g + step * gp;
  const Matrix3d g_minus = g - step * gp;
  const Matrix3d big_g_prime =
      (g_plus.transpose() * g_plus - g_minus.transpose() * g_minus) /
      (2.0 * step);
  const Matrix3d frame_variant =
      s.g_prime_frame.transpose() * d + d * s.g_prime_frame;
  CHECK((f.v.transpose() * big_g_prime * f.v - frame_variant).norm() < 1e-9);

  Matrix3d singular = Matrix3d::Zero();
  singular(0, 0) = 1.0;
  singular(1, 1) = 1.0;
  CHECK(test::thrown_code([&] {
          split_tmr_izr(principal_factors(singular), gp);
        }) == ErrorCode::SingularPrincipalFactor);
}

TEST_CASE("larmor and rabi frequencies from hand-built matrices") {
  Matrix3d g = Matrix3d::Zero();
  g.diagonal() << 2.0, 1.0, 0.5;
  Matrix3d gp = Matrix3d::Zero();
  gp(0, 1) = 1.0;  // per volt

  const RabiResult along_y = rabi_from_g(g, gp, Vec3(0, 1, 0), 1.0, 0.002);
  CHECK(along_y.g_star == doctest::Approx(1.0).epsilon(1e-14));
  // g* mu_B / h = 13.996245 GHz/T for g* = 1.
  CHECK(along_y.f_larmor_hz == doctest::Approx(1.3996245e10).epsilon(1e-6));
  // |g yhat x g' yhat| = |(0,1,0) x (1,0,0)| = 1, so f_R = f_L V_ac / 2.
  CHECK(along_y.f_rabi_hz == doctest::Approx(1.3996245e7).epsilon(1e-6));

  const RabiResult along_z = rabi_from_g(g, gp, Vec3(0, 0, 2.0), 1.0, 0.002);
  CHECK(along_z.g_star == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(along_z.f_rabi_hz == 0.0);  // g' zhat vanishes

  const RabiResult parallel = rabi_from_g(g, g, Vec3(0, 1, 0), 1.0, 0.002);
  CHECK(parallel.f_rabi_hz == 0.0);  // drive collinear with the Zeeman axis

  CHECK(test::thrown_code([&] {
          rabi_from_g(Matrix3d::Zero(), gp, Vec3(0, 0, 1), 1.0, 0.001);
        }) == ErrorCode::ZeroLarmor);
  CHECK(test::thrown_code([&] {
          rabi_from_g(g, gp, Vec3::Zero(), 1.0, 0.001);
        }) == ErrorCode::InvalidConfig);
}

TEST_CASE("perturbation series on a hand-built two-doublet model") {
  PairedStates states;
  states.energies.resize(2);
  states.energies << -5.0, -8.0;

  std::array<Eigen::MatrixXcd, 3> m1;
  m1[0] = Eigen::MatrixXcd::Zero(4, 4);
  m1[1] = Eigen::MatrixXcd::Zero(4, 4);
  m1[2] = Eigen::MatrixXcd::Zero(4, 4);
  // Qubit block diag(0.4, -0.4) makes the zeroth-order states trivial.
  m1[2](0, 0) = 0.4;
  m1[2](1, 1) = -0.4;
  Eigen::Matrix2cd coupling;
  coupling << Cplx(0.3, 0.0), Cplx(0.0, 0.1), Cplx(-0.2, 0.0), Cplx(0.05, 0.0);
  m1[2].block<2, 2>(2, 0) = coupling;
  m1[2].block<2, 2>(0, 2) = coupling.adjoint();

  Eigen::MatrixXcd drive = Eigen::MatrixXcd::Zero(4, 4);
  Eigen::Matrix2cd dblock;
  dblock << Cplx(1.0, 0.0), Cplx(0.5, 0.0), Cplx(0.0, -0.25), Cplx(2.0, 0.0);
  drive.block<2, 2>(0, 2) = dblock;
  drive.block<2, 2>(2, 0) = dblock.adjoint();

  const SeriesResult res =
      perturbation_series(states, m1, drive, Vec3(0.0, 0.0, 0.1), 0.002);
  // By hand: the only term is [X(1,0) + conj(X(0,1))] / 3 with
  // X = dblock * coupling = [[0.2, 0.025+0.1i], [-0.4-0.075i, 0.125]],
  // giving |(-0.375 - 0.175i)| / 3 = sqrt(0.17125) / 3.
  const double expected_sum = std::sqrt(0.17125) / 3.0;
  const double expected_hz = 0.1 * 0.002 * expected_sum * 2.417989242e11;
  CHECK(res.f_rabi_hz == doctest::Approx(expected_hz).epsilon(1e-9));
  REQUIRE(res.contributions_hz.size() == 1);
  CHECK(res.contributions_hz[0] == doctest::Approx(expected_hz).epsilon(1e-9));

  PairedStates degenerate = states;
  degenerate.energies[1] = degenerate.energies[0];
  CHECK(test::thrown_code([&] {
          perturbation_series(degenerate, m1, drive, Vec3(0, 0, 0.1), 0.002);
        }) == ErrorCode::DegenerateExcitedState);
  CHECK(test::thrown_code([&] {
          perturbation_series(states, m1, drive, Vec3::Zero(), 0.002);
        }) == ErrorCode::InvalidConfig);
}

TEST_CASE("single-site direct rabi matches a two-level calculation") {
  // A material with gamma2 = gamma3 = 0 makes the one-node kinetic term a
  // multiple of the identity, so the six levels are set by the spin-orbit
  // splitting and the Bloch Zeeman term alone.
  DeviceSpec spec = test::bare_box(2.0, 2.0, 2.0);
  MaterialParams scalar = silicon();
  scalar.name = "scalar";
  scalar.gamma1 = 1.0;
  scalar.gamma2 = 0.0;
  scalar.gamma3 = 0.0;
  spec.materials["scalar"] = scalar;
  spec.regions[0].material = "scalar";
  const DeviceModel dev = build_device(spec);
  const Mesh mesh = build_mesh(dev, 1.0);
  REQUIRE(mesh.num_channel_nodes() == 1);
  const PotentialField pot = zero_potential(mesh);

  const double bz = 0.2;
  const KpOperator op =
      assemble(dev, mesh, pot, Vec3(0.0, 0.0, bz), CouplingFlags{});

  SparseC drive(6, 6);
  std::vector<Eigen::Triplet<Cplx>> trips;
  trips.emplace_back(0, 1, Cplx(0.3, 0.1));
  trips.emplace_back(1, 0, Cplx(0.3, -0.1));
  trips.emplace_back(0, 4, Cplx(-0.2, 0.0));
  trips.emplace_back(4, 0, Cplx(-0.2, 0.0));
  drive.setFromTriplets(trips.begin(), trips.end());

  const double f = rabi_direct(op, drive, 0.001);

  // Expected: the top state is exactly |3/2,+3/2>; the second diagonalizes
  // the {|3/2,+1/2>, |1/2,+1/2>} block coupled by the kappa' Zeeman entry.
  const double z = constants::mu_b * bz;
  const double kappa = scalar.kappa;
  const double kp1 = 1.0 + kappa;
  Eigen::Matrix2d block;
  block << 0.42 * z, -std::sqrt(2.0) * kp1 * z, -std::sqrt(2.0) * kp1 * z,
      -44.0 - (1.0 + 2.0 * kappa) * z;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(block);
  const Eigen::Vector2d second = es.eigenvectors().col(1);  // larger eigenvalue
  const Cplx elem =
      second[0] * Cplx(0.3, -0.1) + second[1] * Cplx(-0.2, 0.0);
  const double expected = std::abs(elem) * 0.001 * constants::mev_to_hz;
  CHECK(f == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("device g-matrix agrees across the derivative, series and direct routes") {
  // A quadrant top gate over a thin film with a grounded bottom plate: the
  // unit response has a real gradient through the channel and no residual
  // mirror symmetry survives, so g, g' and the Rabi element are all generic.
  DeviceSpec spec;
  spec.regions.push_back({"channel", "silicon", test::box(-4, 4, -3, 3, 0, 3)});
  spec.regions.push_back({"cap", "sio2", test::box(-4, 4, -3, 3, 3, 5)});
  spec.channel_region = "channel";
  spec.gates.push_back({"plug", test::box(0, 4, -3, 0, 5, 5)});
  spec.gates.push_back({"ground", test::box(-4, 4, -3, 3, 0, 0)});
  spec.mesh_spacing = 1.0;
  const DeviceModel dev = build_device(spec);
  const Mesh mesh = build_mesh(dev, 1.0);
  REQUIRE(mesh.num_channel_nodes() == 70);

  const double v0 = -0.15, dv = 1e-3, db = 1e-4;
  const double b_mag = 0.05, v_ac = 1e-3;
  const Vec3 bhat = field_direction(63.0, 37.0);
  const CouplingFlags flags;

  const PotentialField pot0 = solve_poisson(dev, mesh, {{"plug", v0}});
  const Vec3 origin = default_gauge_origin(mesh, pot0);

  const KpOperator op0 = assemble(dev, mesh, pot0, Vec3::Zero(), flags, origin);
  const PairedStates paired = pair_kramers(dense_solve(op0));
  const int n_doublets = static_cast<int>(paired.energies.size());
  REQUIRE(n_doublets == 210);

  Eigen::MatrixXcd basis(op0.dim(), 2 * n_doublets);
  for (int n = 0; n < n_doublets; ++n) {
    basis.col(2 * n) = paired.down.col(n);
    basis.col(2 * n + 1) = paired.up.col(n);
  }
  const auto m1_all = m1_elements(dev, mesh, pot0, flags, origin, basis, basis, db);

  Eigen::MatrixXcd pair0(op0.dim(), 2);
  pair0.col(0) = paired.down.col(0);
  pair0.col(1) = paired.up.col(0);
  const auto m_pair = m1_elements(dev, mesh, pot0, flags, origin, pair0, pair0, db);
  std::array<Eigen::MatrixXcd, 3> m_doublet = {m_pair[0], m_pair[1], m_pair[2]};
  for (int a = 0; a < 3; ++a) {
    // The qubit corner of the full element matrix is the doublet sandwich.
    CHECK((m1_all[a].block<2, 2>(0, 0) - m_doublet[a]).cwiseAbs().maxCoeff() <
          1e-10);
    // Time reversal flips the magnetic moment of the two partners.
    CHECK(std::abs(m_doublet[a](0, 0) + m_doublet[a](1, 1)) < 1e-8);
  }
  const Matrix3d g0 = compute_g(m_doublet);
  const double g_star = effective_g(g0, bhat);
  CHECK(g_star > 0.05);
  CHECK(g_star < 6.0);

  // Derivative of g with respect to the gate voltage, with aligned doublets.
  const UnitResponse ur = unit_response(dev, mesh, "plug");
  const SparseC drive = gate_coupling_operator(mesh, ur.d1);
  Matrix3d g_side[2];
  for (int side = 0; side < 2; ++side) {
    const double v = v0 + (side == 0 ? dv : -dv);
    const PotentialField pot = solve_poisson(dev, mesh, {{"plug", v}});
    const KpOperator op = assemble(dev, mesh, pot, Vec3::Zero(), flags, origin);
    const PairedStates top = pair_kramers(solve_top_states(op, 1));
    const AlignedDoublet al =
        align_doublet(top.down.col(0), top.up.col(0), paired.down.col(0),
                      paired.up.col(0));
    CHECK(al.alpha_down > 0.99);
    CHECK(al.alpha_up > 0.99);
    Eigen::MatrixXcd pair2(op.dim(), 2);
    pair2.col(0) = al.down;
    pair2.col(1) = al.up;
    const auto m = m1_elements(dev, mesh, pot, flags, origin, pair2, pair2, db);
    std::array<Eigen::MatrixXcd, 3> md = {m[0], m[1], m[2]};
    g_side[side] = compute_g(md);
  }
  const Matrix3d gp = g_prime_fd(g_side[0], g_side[1], dv);
  CHECK(gp.norm() > 1e-3);  // the quadrant gate does move the g-matrix

  const RabiResult rr = rabi_from_g(g0, gp, bhat, b_mag, v_ac);
  CHECK(rr.g_star == doctest::Approx(g_star).epsilon(1e-12));
  CHECK(rr.f_rabi_hz > 1e3);

  // Route 2: second-order perturbation series over every excited doublet.
  const Eigen::MatrixXcd drive_all = basis.adjoint() * (drive * basis);
  const SeriesResult series =
      perturbation_series(paired, m1_all, drive_all, b_mag * bhat, v_ac);
  CHECK(series.f_rabi_hz ==
        doctest::Approx(rr.f_rabi_hz).epsilon(1e-3));
  CHECK(series.contributions_hz.size() == static_cast<size_t>(n_doublets - 1));

  // Route 3: exact matrix element between the split qubit states at finite B.
  const KpOperator op_b =
      assemble(dev, mesh, pot0, b_mag * bhat, flags, origin);
  const double f_direct = rabi_direct(op_b, drive, v_ac);
  CHECK(f_direct == doctest::Approx(rr.f_rabi_hz).epsilon(1e-3));

  // The Larmor frequency matches the exact Zeeman splitting at this field.
  const EigenSet top_b = solve_top_states(op_b, 1);
  const double f_split =
      (top_b.values[0] - top_b.values[1]) * constants::mev_to_hz;
  CHECK(f_split == doctest::Approx(rr.f_larmor_hz).epsilon(1e-3));

  // Principal factors and the derivative split stay internally consistent.
  const PrincipalFactors pf = principal_factors(g0);
  CHECK((pf.u * pf.g_d.asDiagonal() * pf.v.transpose() - g0).norm() < 1e-12);
  const GPrimeSplit split = split_tmr_izr(pf, gp);
  CHECK((split.antisym + split.antisym.transpose()).norm() <
        1e-10 * std::max(1.0, split.antisym.norm()));

  // Moving the gauge origin must not move the doublet magnetic elements.
  const auto m_shift = m1_elements(dev, mesh, pot0, flags,
                                   origin + Vec3(1.5, -2.0, 0.7), pair0, pair0, db);
  std::array<Eigen::MatrixXcd, 3> md_shift = {m_shift[0], m_shift[1], m_shift[2]};
  const Matrix3d g_shift = compute_g(md_shift);
  CHECK((g_shift - g0).cwiseAbs().maxCoeff() < 1e-6);

  // The whole chain is deterministic.
  const PairedStates paired2 = pair_kramers(dense_solve(op0));
  Eigen::MatrixXcd pair_re(op0.dim(), 2);
  pair_re.col(0) = paired2.down.col(0);
  pair_re.col(1) = paired2.up.col(0);
  const auto m_re = m1_elements(dev, mesh, pot0, flags, origin, pair_re, pair_re, db);
  std::array<Eigen::MatrixXcd, 3> md_re = {m_re[0], m_re[1], m_re[2]};
  CHECK((compute_g(md_re) - g0).norm() == 0.0);
}

TEST_SUITE_END();
