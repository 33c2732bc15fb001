#include "kpg/spectrum.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <string>

#include "kpg/errors.hpp"

#define LAPACK_COMPLEX_CUSTOM
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace kpg {

namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Estimates both spectral edges with a short plain Lanczos run; used only to
// sharpen the shift, never as a correctness guarantee.
std::pair<double, double> edge_estimates(const SparseC& h, uint64_t seed) {
  const int64_t dim = h.rows();
  const int steps = static_cast<int>(std::min<int64_t>(40, dim));
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorXcd v(dim);
  for (int64_t i = 0; i < dim; ++i) v(i) = Cplx(gauss(rng), gauss(rng));
  v.normalize();

  VectorXd alpha(steps), beta(steps);
  VectorXcd prev = VectorXcd::Zero(dim);
  double b_prev = 0.0;
  int used = 0;
  for (int j = 0; j < steps; ++j) {
    VectorXcd w = h * v;
    const double a = std::real(v.dot(w));
    w -= a * v + b_prev * prev;
    alpha(j) = a;
    used = j + 1;
    const double b = w.norm();
    beta(j) = b;
    if (b < 1e-12) break;
    prev = v;
    v = w / b;
    b_prev = b;
  }
  Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(used, used);
  for (int j = 0; j < used; ++j) {
    tri(j, j) = alpha(j);
    if (j + 1 < used) tri(j, j + 1) = tri(j + 1, j) = beta(j);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

EigenSet dense_path(const KpOperator& op, int keep) {
  EigenSet full = dense_solve(op);
  if (keep >= full.values.size()) return full;
  EigenSet out;
  out.values = full.values.head(keep);
  out.vectors = full.vectors.leftCols(keep);
  out.max_residual = full.max_residual;
  return out;
}

}  // namespace

Eigen::VectorXcd apply_time_reversal(const Eigen::VectorXcd& state) {
  const Matrix6c u = time_reversal_matrix();
  const int64_t blocks = state.size() / 6;
  VectorXcd out(state.size());
  for (int64_t b = 0; b < blocks; ++b) {
    out.segment<6>(6 * b) = u * state.segment<6>(6 * b).conjugate();
  }
  return out;
}

EigenSet dense_solve(const KpOperator& op) {
  const int64_t dim = op.dim();
  if (dim > 12000) {
    fail(ErrorCode::DimensionTooLarge,
         "dense diagonalization capped at 12000 unknowns, got " +
             std::to_string(dim));
  }
  MatrixXcd a(op.matrix);
  VectorXd w(dim);
  const lapack_int info = LAPACKE_zheevd(
      LAPACK_COL_MAJOR, 'V', 'U', static_cast<lapack_int>(dim), a.data(),
      static_cast<lapack_int>(dim), w.data());
  if (info != 0) {
    fail(ErrorCode::NotConverged,
         "LAPACK zheevd failed with info=" + std::to_string(info));
  }
  EigenSet out;
  out.values = w.reverse();
  out.vectors = a.rowwise().reverse();
  out.shift = 0.0;
  double worst = 0.0;
  const int probe = static_cast<int>(std::min<int64_t>(dim, 8));
  for (int i = 0; i < probe; ++i) {
    worst = std::max(worst, (op.matrix * out.vectors.col(i) -
                             out.values(i) * out.vectors.col(i))
                                .norm());
  }
  out.max_residual = worst;
  return out;
}

EigenSet solve_top_states(const KpOperator& op, int num_pairs, uint64_t seed,
                          int max_iterations, double tol) {
  const int64_t dim = op.dim();
  if (num_pairs < 1) {
    fail(ErrorCode::InvalidConfig, "num_pairs must be at least 1");
  }
  const int nev = static_cast<int>(std::min<int64_t>(2 * num_pairs, dim));
  if (dim <= 1000 || nev >= dim / 3) return dense_path(op, nev);

  // ---- choose the shift ----------------------------------------------------
  const double certified = op.spectral_upper_bound;
  const auto [lo_est, hi_est] = edge_estimates(op.matrix, seed);
  const double spread = std::max(1.0, hi_est - lo_est);
  double sigma = std::min(certified, hi_est + std::max(1.0, 0.05 * spread));

  SparseC identity(dim, dim);
  identity.setIdentity();
  Eigen::SimplicialLDLT<SparseC> ldlt;
  for (int attempt = 0;; ++attempt) {
    SparseC shifted = (sigma * identity - op.matrix).pruned();
    ldlt.compute(shifted);
    const bool pd = ldlt.info() == Eigen::Success &&
                    ldlt.vectorD().real().minCoeff() > 0.0;
    if (pd) break;
    if (attempt >= 3 || sigma >= certified) {
      fail(ErrorCode::NotConverged,
           "could not factor a positive definite shifted operator");
    }
    sigma = 0.5 * (sigma + certified);
    if (attempt == 2) sigma = certified;
  }

  // ---- block Lanczos on (sigma I - H)^-1 ----------------------------------
  constexpr int kBlock = 2;  // resolves Kramers doublets
  const int m_max =
      static_cast<int>(std::min<int64_t>(dim, std::max(6 * nev, 240)));
  MatrixXcd basis(dim, m_max);       // orthonormal Krylov basis V
  MatrixXcd image(dim, m_max);       // C V with C the shift-inverted operator
  MatrixXcd proj = MatrixXcd::Zero(m_max, m_max);  // V^H C V

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_column = [&]() {
    VectorXcd v(dim);
    for (int64_t i = 0; i < dim; ++i) v(i) = Cplx(gauss(rng), gauss(rng));
    return v;
  };

  // Orthonormalizes `w` against the first `m` basis columns (twice) and all
  // previously accepted columns of the same block; replaces collapsed
  // directions with fresh random vectors.
  auto orthonormalize = [&](VectorXcd& w, int m, const MatrixXcd& block,
                            int accepted) {
    for (int guard = 0; guard < 8; ++guard) {
      for (int pass = 0; pass < 2; ++pass) {
        if (m > 0) {
          w -= basis.leftCols(m) * (basis.leftCols(m).adjoint() * w);
        }
        for (int c = 0; c < accepted; ++c) {
          w -= block.col(c) * block.col(c).dot(w);
        }
      }
      const double norm = w.norm();
      if (norm > 1e-8) {
        w /= norm;
        return;
      }
      w = random_column();
    }
    fail(ErrorCode::NotConverged, "Krylov basis collapsed");
  };

  MatrixXcd x(dim, kBlock);
  for (int c = 0; c < kBlock; ++c) {
    VectorXcd v = random_column();
    orthonormalize(v, 0, x, c);
    x.col(c) = v;
  }

  int m = 0;
  int iterations = 0;
  VectorXd ritz_prev;
  EigenSet out;
  const int check_every = 5;

  for (int step = 0; step < max_iterations && m + kBlock <= m_max; ++step) {
    iterations = step + 1;
    basis.middleCols(m, kBlock) = x;
    for (int c = 0; c < kBlock; ++c) {
      image.col(m + c) = ldlt.solve(x.col(c));
    }
    // Extend the projected matrix with the new block.
    const int m_new = m + kBlock;
    proj.block(0, m, m_new, kBlock) =
        basis.leftCols(m_new).adjoint() * image.middleCols(m, kBlock);
    proj.block(m, 0, kBlock, m) =
        proj.block(0, m, m, kBlock).adjoint().eval();
    m = m_new;

    // Next block: C times the current one, orthogonalized against the basis.
    MatrixXcd next(dim, kBlock);
    for (int c = 0; c < kBlock; ++c) {
      VectorXcd w = image.col(m - kBlock + c);
      orthonormalize(w, m, next, c);
      next.col(c) = w;
    }
    x = next;

    if (m < nev + kBlock || (step % check_every != 0 && m + kBlock <= m_max &&
                             step + 1 < max_iterations)) {
      continue;
    }

    MatrixXcd small = proj.topLeftCorner(m, m);
    small = 0.5 * (small + small.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(small);
    if (es.info() != Eigen::Success) continue;
    const int takeable = std::min(nev, m);
    VectorXd mu = es.eigenvalues().tail(takeable).reverse();
    const bool stable =
        ritz_prev.size() == mu.size() &&
        ((mu - ritz_prev).cwiseAbs().array() <=
         1e-11 * mu.cwiseAbs().array().max(1e-30))
            .all();
    ritz_prev = mu;
    if (!stable && m + kBlock <= m_max && iterations < max_iterations) {
      continue;
    }

    // Assemble Ritz vectors and verify residuals on the original operator.
    MatrixXcd y =
        basis.leftCols(m) * es.eigenvectors().rightCols(takeable).rowwise().reverse();
    VectorXd lam(takeable);
    double worst = 0.0;
    for (int i = 0; i < takeable; ++i) {
      lam(i) = sigma - 1.0 / mu(i);
      worst = std::max(
          worst, (op.matrix * y.col(i) - lam(i) * y.col(i)).norm());
    }
    const double budget = tol * std::max(1.0, sigma - lo_est);
    if (worst <= budget || takeable < nev) {
      if (takeable < nev && m + kBlock <= m_max &&
          iterations < max_iterations) {
        continue;
      }
      out.values = lam;
      out.vectors = y;
      out.iterations = iterations;
      out.max_residual = worst;
      out.shift = sigma;
      if (worst > budget) {
        fail(ErrorCode::NotConverged,
             "eigensolver residual " + std::to_string(worst) +
                 " exceeds budget " + std::to_string(budget));
      }
      return out;
    }
    if (m + kBlock > m_max || iterations >= max_iterations) {
      fail(ErrorCode::NotConverged,
           "eigensolver residual " + std::to_string(worst) +
               " exceeds budget " + std::to_string(budget) + " after " +
               std::to_string(iterations) + " block steps");
    }
  }
  fail(ErrorCode::NotConverged, "Krylov budget exhausted before convergence");
}

PairedStates pair_kramers(const EigenSet& states, double tol) {
  const int count = static_cast<int>(states.values.size());
  if (count % 2 != 0) {
    fail(ErrorCode::UnpairedState,
         "odd number of states cannot form Kramers doublets");
  }
  const int pairs = count / 2;
  PairedStates out;
  out.energies.resize(pairs);
  out.down.resize(states.vectors.rows(), pairs);
  out.up.resize(states.vectors.rows(), pairs);
  out.splittings.resize(pairs);

  for (int p = 0; p < pairs; ++p) {
    const int a = 2 * p, b = 2 * p + 1;
    const double ea = states.values(a), eb = states.values(b);
    const double split = std::abs(ea - eb);
    if (split > tol * std::max(1.0, std::abs(ea))) {
      fail(ErrorCode::UnpairedState,
           "states at " + std::to_string(ea) + " and " + std::to_string(eb) +
               " meV do not form a degenerate doublet");
    }
    VectorXcd down = states.vectors.col(a);
    // Deterministic phase: the largest component is made real positive.
    int imax = 0;
    double best = 0.0;
    for (int64_t i = 0; i < down.size(); ++i) {
      const double mag = std::abs(down(i));
      if (mag > best) {
        best = mag;
        imax = static_cast<int>(i);
      }
    }
    down *= std::conj(down(imax)) / std::abs(down(imax));

    const VectorXcd partner = apply_time_reversal(down);
    // The partner must stay inside the solved doublet span; any leak is the
    // time-reversal defect of the numerical subspace.
    const VectorXcd& va = states.vectors.col(a);
    const VectorXcd& vb = states.vectors.col(b);
    const Cplx ca = va.dot(partner);
    const Cplx cb = vb.dot(partner);
    const double leak = (partner - ca * va - cb * vb).norm();
    if (leak > 1e-6) {
      fail(ErrorCode::UnpairedState,
           "time-reversal partner leaks out of the doublet subspace (norm " +
               std::to_string(leak) + ")");
    }
    // Keep the exact partner as the mate: <down|T down> = 0 and
    // ||T down|| = ||down|| hold identically, so frame rotations built from
    // (down, up) commute with time reversal to machine precision instead of
    // to the leak size, which a later 1/(2 delta_v) differencing would
    // amplify.

    out.energies(p) = 0.5 * (ea + eb);
    out.down.col(p) = down;
    out.up.col(p) = partner;
    out.splittings[p] = split;
  }
  return out;
}

}  // namespace kpg
