#include "kpg/poisson.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>

#include "kpg/errors.hpp"

namespace kpg {

namespace {

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

// Width of the dual (control-volume) cell of node index `idx` along `axis`.
double dual_width(const Mesh& m, int axis, int idx) {
  if (axis == 0 && m.periodic_x) return m.h[0];
  if (idx == 0 || idx == m.n[axis] - 1) return 0.5 * m.h[axis];
  return m.h[axis];
}

struct LinkWalker {
  const DeviceModel& dev;
  const Mesh& mesh;

  double eps_of(int64_t node) const {
    return dev.region_materials[mesh.region_of[node]].permittivity;
  }

  // Calls fn(node_a, node_b, conductance) once per mesh link.
  template <typename F>
  void each_link(F&& fn) const {
    const int dirs[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int k = 0; k < mesh.n[2]; ++k)
      for (int j = 0; j < mesh.n[1]; ++j)
        for (int i = 0; i < mesh.n[0]; ++i) {
          int64_t a = mesh.lin(i, j, k);
          int idx[3] = {i, j, k};
          for (int ax = 0; ax < 3; ++ax) {
            int64_t b =
                mesh.neighbor(i, j, k, dirs[ax][0], dirs[ax][1], dirs[ax][2]);
            if (b < 0) continue;
            if (ax == 0 && mesh.periodic_x && mesh.n[0] == 1) continue;
            int b1 = (ax + 1) % 3, b2 = (ax + 2) % 3;
            double area =
                dual_width(mesh, b1, idx[b1]) * dual_width(mesh, b2, idx[b2]);
            double g =
                harmonic(eps_of(a), eps_of(b)) * area / mesh.h[ax];
            fn(a, b, g);
          }
        }
  }
};

}  // namespace

PotentialField solve_poisson(
    const DeviceModel& device, const Mesh& mesh,
    const std::map<std::string, double>& gate_voltages) {
  for (const auto& [name, v] : gate_voltages)
    if (device.gate_index(name) < 0)
      fail(ErrorCode::UnknownGate, "no gate named '" + name + "'");

  int64_t nn = mesh.num_nodes();
  std::vector<double> elec_v(nn, 0.0);
  std::vector<uint8_t> is_elec(nn, 0);
  for (int64_t id = 0; id < nn; ++id) {
    int g = mesh.gate_of[id];
    if (g < 0) continue;
    is_elec[id] = 1;
    auto it = gate_voltages.find(device.gates[g].name);
    elec_v[id] = it == gate_voltages.end() ? 0.0 : it->second;
  }

  std::vector<int64_t> unknown_of(nn, -1);
  std::vector<int64_t> node_of;
  for (int64_t id = 0; id < nn; ++id)
    if (!is_elec[id]) {
      unknown_of[id] = static_cast<int64_t>(node_of.size());
      node_of.push_back(id);
    }
  int64_t nu = static_cast<int64_t>(node_of.size());

  PotentialField field;
  field.gate_voltages = gate_voltages;
  field.values.assign(nn, 0.0);
  for (int64_t id = 0; id < nn; ++id)
    if (is_elec[id]) field.values[id] = elec_v[id];

  bool all_grounded = true;
  for (const auto& [name, v] : gate_voltages)
    if (v != 0.0) all_grounded = false;
  if (device.gates.empty() || all_grounded) return field;  // V = 0 exactly

  LinkWalker walker{device, mesh};
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nu);
  walker.each_link([&](int64_t a, int64_t b, double g) {
    int64_t ua = unknown_of[a], ub = unknown_of[b];
    if (ua >= 0 && ub >= 0) {
      trips.emplace_back(ua, ua, g);
      trips.emplace_back(ub, ub, g);
      trips.emplace_back(ua, ub, -g);
      trips.emplace_back(ub, ua, -g);
    } else if (ua >= 0) {
      trips.emplace_back(ua, ua, g);
      rhs[ua] += g * elec_v[b];
    } else if (ub >= 0) {
      trips.emplace_back(ub, ub, g);
      rhs[ub] += g * elec_v[a];
    }
  });

  Eigen::SparseMatrix<double> A(nu, nu);
  A.setFromTriplets(trips.begin(), trips.end());

  Eigen::VectorXd x;
  if (nu <= 40000) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
    if (ldlt.info() != Eigen::Success)
      fail(ErrorCode::SolverDiverged, "Poisson factorization failed");
    x = ldlt.solve(rhs);
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>,
                             Eigen::Lower | Eigen::Upper,
                             Eigen::IncompleteCholesky<double>>
        cg;
    cg.setTolerance(1e-13);
    cg.setMaxIterations(20000);
    cg.compute(A);
    x = cg.solve(rhs);
    if (cg.info() != Eigen::Success && cg.error() > 1e-10)
      fail(ErrorCode::SolverDiverged,
           "Poisson CG stalled at relative residual " +
               std::to_string(cg.error()));
  }

  double bn = rhs.norm();
  if (bn > 0.0) {
    double rel = (A * x - rhs).norm() / bn;
    if (!(rel < 1e-10))
      fail(ErrorCode::SolverDiverged,
           "Poisson residual " + std::to_string(rel) + " exceeds 1e-10");
  }

  for (int64_t u = 0; u < nu; ++u) field.values[node_of[u]] = x[u];
  return field;
}

UnitResponse unit_response(const DeviceModel& device, const Mesh& mesh,
                           const std::string& gate) {
  if (device.gate_index(gate) < 0)
    fail(ErrorCode::UnknownGate, "no gate named '" + gate + "'");
  std::map<std::string, double> bias;
  for (const auto& g : device.gates) bias[g.name] = 0.0;
  bias[gate] = 1.0;
  PotentialField f = solve_poisson(device, mesh, bias);

  UnitResponse r;
  r.gate = gate;
  r.d1 = f.values;
  int64_t nn = mesh.num_nodes();
  r.e1x.assign(nn, 0.0);
  r.e1y.assign(nn, 0.0);
  r.e1z.assign(nn, 0.0);

  auto deriv = [&](int i, int j, int k, int axis) {
    int idx[3] = {i, j, k};
    double h = mesh.h[axis];
    auto val = [&](int d) {
      int q[3] = {i, j, k};
      q[axis] += d;
      if (axis == 0 && mesh.periodic_x) {
        if (q[0] < 0) q[0] += mesh.n[0];
        if (q[0] >= mesh.n[0]) q[0] -= mesh.n[0];
      }
      return r.d1[mesh.lin(q[0], q[1], q[2])];
    };
    bool lo = idx[axis] == 0, hi = idx[axis] == mesh.n[axis] - 1;
    if (axis == 0 && mesh.periodic_x) lo = hi = false;
    if (!lo && !hi) return (val(+1) - val(-1)) / (2.0 * h);
    if (lo) return (-3.0 * val(0) + 4.0 * val(+1) - val(+2)) / (2.0 * h);
    return (3.0 * val(0) - 4.0 * val(-1) + val(-2)) / (2.0 * h);
  };

  for (int k = 0; k < mesh.n[2]; ++k)
    for (int j = 0; j < mesh.n[1]; ++j)
      for (int i = 0; i < mesh.n[0]; ++i) {
        int64_t id = mesh.lin(i, j, k);
        r.e1x[id] = -deriv(i, j, k, 0);
        r.e1y[id] = -deriv(i, j, k, 1);
        r.e1z[id] = -deriv(i, j, k, 2);
      }
  return r;
}

Parity field_parity(const Mesh& mesh, const UnitResponse& e1,
                    const MirrorPlane& mirror, const Box& window, double tol) {
  int ax = mirror.axis;
  if (ax < 0 || ax > 2)
    fail(ErrorCode::MisalignedMirror, "mirror axis must be 0, 1 or 2");
  double rpos = (mirror.position - mesh.origin[ax]) / mesh.h[ax];
  if (std::abs(rpos - std::round(rpos)) > 1e-9)
    fail(ErrorCode::MisalignedMirror,
         "mirror plane does not coincide with a mesh plane");
  int plane = static_cast<int>(std::llround(rpos));

  double d_even = 0.0, d_odd = 0.0, norm = 0.0;
  for (int k = 0; k < mesh.n[2]; ++k)
    for (int j = 0; j < mesh.n[1]; ++j)
      for (int i = 0; i < mesh.n[0]; ++i) {
        Vec3 p = mesh.node_pos(i, j, k);
        if (!window.contains(p, 1e-9)) continue;
        int idx[3] = {i, j, k};
        int mi = 2 * plane - idx[ax];
        if (mi < 0 || mi >= mesh.n[ax])
          fail(ErrorCode::MisalignedMirror,
               "mirrored node falls outside the mesh");
        int q[3] = {i, j, k};
        q[ax] = mi;
        int64_t id = mesh.lin(i, j, k);
        int64_t mid = mesh.lin(q[0], q[1], q[2]);
        Vec3 e{e1.e1x[id], e1.e1y[id], e1.e1z[id]};
        Vec3 em{e1.e1x[mid], e1.e1y[mid], e1.e1z[mid]};
        Vec3 se = e;
        se[ax] = -se[ax];  // sigma applied to the vector
        d_even += (em - se).squaredNorm();
        d_odd += (em + se).squaredNorm();
        norm += e.squaredNorm();
      }
  if (norm == 0.0) return Parity::Even;
  double re = std::sqrt(d_even / norm), ro = std::sqrt(d_odd / norm);
  if (re < tol && re <= ro) return Parity::Even;
  if (ro < tol) return Parity::Odd;
  return Parity::None;
}

double max_flux_residual(const DeviceModel& device, const Mesh& mesh,
                         const PotentialField& field) {
  int64_t nn = mesh.num_nodes();
  std::vector<double> net(nn, 0.0), scale(nn, 0.0);
  LinkWalker walker{device, mesh};
  walker.each_link([&](int64_t a, int64_t b, double g) {
    double f = g * (field.values[b] - field.values[a]);
    net[a] += f;
    net[b] -= f;
    scale[a] += std::abs(f);
    scale[b] += std::abs(f);
  });
  double worst = 0.0;
  for (int64_t id = 0; id < nn; ++id) {
    if (mesh.gate_of[id] >= 0) continue;  // electrodes source/sink flux
    // skip open-boundary nodes: natural BC means their volume is truncated
    int i, j, k;
    mesh.unlin(id, i, j, k);
    bool interior = (mesh.periodic_x || (i > 0 && i < mesh.n[0] - 1)) &&
                    j > 0 && j < mesh.n[1] - 1 && k > 0 && k < mesh.n[2] - 1;
    if (!interior) continue;
    if (scale[id] == 0.0) continue;
    worst = std::max(worst, std::abs(net[id]) / scale[id]);
  }
  return worst;
}

const char* parity_name(Parity p) {
  switch (p) {
    case Parity::Even: return "even";
    case Parity::Odd: return "odd";
    case Parity::None: return "none";
  }
  return "?";
}

}  // namespace kpg
