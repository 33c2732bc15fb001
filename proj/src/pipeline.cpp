#include "kpg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <thread>
#include <utility>

#include "json.hpp"
#include "kpg/constants.hpp"
#include "kpg/errors.hpp"
#include "kpg/hash.hpp"
#include "kpg/reference.hpp"

namespace kpg {

namespace {

using nlohmann::json;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Parity classification tolerance for the bias potential and drive response.
// Both come out of a direct linear solve, so exact symmetries hold to solver
// roundoff; 1e-8 separates them cleanly from genuinely asymmetric fields.
constexpr double kParityTol = 1e-8;

struct BiasSolve {
  PotentialField pot;
  PairedStates paired;
  bool hit = false;
};

BiasSolve solve_cached(const DeviceModel& device, const Mesh& mesh,
                       const std::map<std::string, double>& bias,
                       const CouplingFlags& flags, const SolverConfig& solver,
                       SolveCache* cache) {
  const bool use_cache = cache && cache->enabled();
  uint64_t key = 0;
  if (use_cache) {
    key = solve_cache_key(device, mesh, bias, flags, solver);
    if (auto entry = cache->load(key)) {
      BiasSolve out;
      out.hit = true;
      out.pot.gate_voltages = std::move(entry->gate_voltages);
      out.pot.values = std::move(entry->potential);
      out.paired.energies = std::move(entry->energies);
      out.paired.down = std::move(entry->down);
      out.paired.up = std::move(entry->up);
      out.paired.splittings.assign(
          entry->splittings.data(),
          entry->splittings.data() + entry->splittings.size());
      return out;
    }
  }
  BiasSolve out;
  out.pot = solve_poisson(device, mesh, bias);
  const KpOperator op = assemble(device, mesh, out.pot, Vec3::Zero(), flags);
  const EigenSet states = solve_top_states(op, solver.pairs, solver.seed,
                                           solver.max_iterations, solver.tol);
  out.paired = pair_kramers(states, solver.pairing_tol);
  if (use_cache) {
    CachedSolve entry;
    entry.gate_voltages = out.pot.gate_voltages;
    entry.potential = out.pot.values;
    entry.energies = out.paired.energies;
    entry.splittings = Eigen::Map<const Eigen::VectorXd>(
        out.paired.splittings.data(),
        static_cast<Eigen::Index>(out.paired.splittings.size()));
    entry.down = out.paired.down;
    entry.up = out.paired.up;
    cache->store(key, entry);
  }
  return out;
}

std::array<Eigen::MatrixXcd, 3> doublet_m1(const DeviceModel& device,
                                           const Mesh& mesh,
                                           const PotentialField& pot,
                                           const CouplingFlags& flags,
                                           const Vec3& origin,
                                           const VecXc& down, const VecXc& up,
                                           double delta_b) {
  Eigen::MatrixXcd basis(down.size(), 2);
  basis.col(0) = down;
  basis.col(1) = up;
  return m1_elements(device, mesh, pot, flags, origin, basis, basis, delta_b);
}

// g-matrix of the doublet stored in the first two basis columns.
Matrix3d corner_g(const std::array<Eigen::MatrixXcd, 3>& m) {
  std::array<Eigen::MatrixXcd, 3> two;
  for (int a = 0; a < 3; ++a) two[a] = m[a].topLeftCorner(2, 2);
  return compute_g(two);
}

// Aligns a side solve to the reference doublet and evaluates its g-matrix
// with the shared gauge origin. Optionally records the aligned states.
Matrix3d side_g(const DeviceModel& device, const Mesh& mesh,
                const PotentialField& side_pot, const VecXc& side_down,
                const VecXc& side_up, const CouplingFlags& flags,
                const Vec3& origin, const VecXc& ref_down, const VecXc& ref_up,
                double delta_b, SidePoint* record) {
  const AlignedDoublet al = align_doublet(side_down, side_up, ref_down, ref_up);
  if (record) {
    record->pot = side_pot;
    record->down = al.down;
    record->up = al.up;
    record->alpha = std::min(al.alpha_down, al.alpha_up);
  }
  return corner_g(
      doublet_m1(device, mesh, side_pot, flags, origin, al.down, al.up, delta_b));
}

double heavy_hole_weight(const VecXc& state) {
  double w = 0.0;
  for (Eigen::Index q = 0; q + 5 < state.size(); q += 6)
    w += std::norm(state[q]) + std::norm(state[q + 3]);
  return w;
}

std::string sanitize_csv(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json mat3_json(const Matrix3d& m) {
  json rows = json::array();
  for (int i = 0; i < 3; ++i)
    rows.push_back(json::array({m(i, 0), m(i, 1), m(i, 2)}));
  return rows;
}

Matrix3d mat3_from(const json& j) {
  Matrix3d m;
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c) m(i, c) = j.at(i).at(c).get<double>();
  return m;
}

json vec3_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

Vec3 vec3_from(const json& j) {
  return Vec3(j.at(0).get<double>(), j.at(1).get<double>(),
              j.at(2).get<double>());
}

json report_json(const PatternReport& r) {
  json viol = json::array();
  for (const auto& [i, j] : r.violations) viol.push_back(json::array({i, j}));
  return {{"pass", r.pass},           {"tol_rel", r.tol_rel},
          {"worst_ratio", r.worst_ratio}, {"worst_row", r.worst_row},
          {"worst_col", r.worst_col}, {"violations", viol}};
}

PatternReport report_from(const json& j) {
  PatternReport r;
  r.pass = j.at("pass").get<bool>();
  r.tol_rel = j.at("tol_rel").get<double>();
  r.worst_ratio = j.at("worst_ratio").get<double>();
  r.worst_row = j.at("worst_row").get<int>();
  r.worst_col = j.at("worst_col").get<int>();
  for (const auto& v : j.at("violations"))
    r.violations.emplace_back(v.at(0).get<int>(), v.at(1).get<int>());
  return r;
}

Parity parity_from(const std::string& s) {
  if (s == "even") return Parity::Even;
  if (s == "odd") return Parity::Odd;
  if (s == "none") return Parity::None;
  fail(ErrorCode::ConfigParse, "unknown parity label '" + s + "'");
}

json pattern_json(const ZeroPattern& p) {
  json mask = json::array();
  for (int i = 0; i < 3; ++i)
    mask.push_back(json::array(
        {p.forbids(i, 0), p.forbids(i, 1), p.forbids(i, 2)}));
  return {{"zero", mask}, {"sources", p.sources}};
}

uint64_t hash_from_hex(const std::string& s) {
  if (s.size() != 16) fail(ErrorCode::ConfigParse, "bad config hash field");
  return std::stoull(s, nullptr, 16);
}

}  // namespace

uint64_t run_fingerprint(const DeviceModel& device, const Mesh& mesh,
                         const RunConfig& run) {
  Hasher h;
  h.add(device.content_hash());
  h.add(mesh.content_hash());
  h.add(run.content_hash());
  return h.value();
}

uint64_t solve_fingerprint(const DeviceModel& device, const Mesh& mesh,
                           const RunConfig& run) {
  Hasher h;
  h.add(solve_cache_key(device, mesh, run.bias, run.flags, run.solver));
  h.add(run.drive_gate);
  h.add(run.solver.delta_v);
  h.add(run.solver.delta_b);
  return h.value();
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SolveBundle run_solve(const DeviceModel& device, const Mesh& mesh,
                      const RunConfig& run, SolveCache* cache) {
  // Validate every referenced gate before any numerical work starts.
  if (run.drive_gate.empty())
    fail(ErrorCode::InvalidConfig, "no drive gate configured");
  if (device.gate_index(run.drive_gate) < 0)
    fail(ErrorCode::UnknownGate,
         "drive gate '" + run.drive_gate + "' does not exist");
  for (const auto& [name, v] : run.bias)
    if (device.gate_index(name) < 0)
      fail(ErrorCode::UnknownGate, "bias names unknown gate '" + name + "'");
  if (!(run.field.b_tesla > 0.0) && !(run.field.fixed_zeeman_ghz > 0.0))
    fail(ErrorCode::InvalidConfig,
         "either the field magnitude or the Zeeman target must be positive");
  if (run.field.b_tesla > 0.0 && run.field.fixed_zeeman_ghz > 0.0)
    fail(ErrorCode::InvalidConfig,
         "field magnitude and Zeeman target are mutually exclusive");
  if (!(run.solver.delta_v > 0.0))
    fail(ErrorCode::InvalidConfig, "delta_v must be positive");

  SolveBundle b;
  BiasSolve base =
      solve_cached(device, mesh, run.bias, run.flags, run.solver, cache);
  base.hit ? ++b.cache_hits : ++b.cache_misses;
  b.pot = std::move(base.pot);
  b.paired = std::move(base.paired);
  b.gauge_origin = default_gauge_origin(mesh, b.pot);

  GMatrixSet& gs = b.gset;
  gs.config_hash = run_fingerprint(device, mesh, run);
  gs.solve_hash = solve_fingerprint(device, mesh, run);
  gs.b_tesla = run.field.b_tesla;
  gs.v_ac = run.field.v_ac;
  gs.delta_v = run.solver.delta_v;
  gs.pair_energies = b.paired.energies;

  // Geometric mirrors constrain the doublet only when the bias potential is
  // itself even; the ground doublet is rotated into the adapted basis of the
  // first such mirror so the tabulated zero patterns become visible.
  gs.mirrors = detect_mirrors(device, mesh);
  for (int i = 0; i < static_cast<int>(gs.mirrors.size()); ++i) {
    gs.bias_parity.push_back(
        scalar_parity(mesh, b.pot.values, gs.mirrors[i], kParityTol));
    if (gs.bias_parity.back() == Parity::Even) gs.constrained.push_back(i);
  }
  if (!gs.constrained.empty()) {
    const MirrorPlane& first = gs.mirrors[gs.constrained.front()];
    const SymmetricDoublet ad = symmetry_adapt(
        mesh, first, b.paired.down.col(0), b.paired.up.col(0));
    b.paired.down.col(0) = ad.down;
    b.paired.up.col(0) = ad.up;
  }

  b.drive_response = unit_response(device, mesh, run.drive_gate);
  b.drive = gate_coupling_operator(mesh, b.drive_response.d1);
  for (const auto& m : gs.mirrors)
    gs.drive_parity.push_back(
        scalar_parity(mesh, b.drive_response.d1, m, kParityTol));

  // Magnetic and drive elements across the whole solve window, in the paired
  // basis [down_0, up_0, down_1, up_1, ...].
  const Eigen::Index pairs = b.paired.energies.size();
  Eigen::MatrixXcd basis(b.paired.down.rows(), 2 * pairs);
  for (Eigen::Index p = 0; p < pairs; ++p) {
    basis.col(2 * p) = b.paired.down.col(p);
    basis.col(2 * p + 1) = b.paired.up.col(p);
  }
  b.m1_all = m1_elements(device, mesh, b.pot, run.flags, b.gauge_origin, basis,
                         basis, run.solver.delta_b);
  b.drive_all = basis.adjoint() * (b.drive * basis).eval();
  gs.g = corner_g(b.m1_all);

  // Side solves at +-delta_v on the drive gate need only the ground doublet.
  // Their residuals enter g' amplified by 1/(2 delta_v), so they are solved
  // to a much tighter tolerance than the spectrum window; that keeps g'
  // gauge-invariant and its symmetry zeros clean at the default bias step.
  SolverConfig side_cfg = run.solver;
  side_cfg.pairs = 1;
  side_cfg.tol = std::min(run.solver.tol, 1e-13);
  std::map<std::string, double> bias_minus = run.bias, bias_plus = run.bias;
  bias_minus[run.drive_gate] -= run.solver.delta_v;
  bias_plus[run.drive_gate] += run.solver.delta_v;
  BiasSolve sm =
      solve_cached(device, mesh, bias_minus, run.flags, side_cfg, cache);
  sm.hit ? ++b.cache_hits : ++b.cache_misses;
  BiasSolve sp =
      solve_cached(device, mesh, bias_plus, run.flags, side_cfg, cache);
  sp.hit ? ++b.cache_hits : ++b.cache_misses;

  const Matrix3d g_minus =
      side_g(device, mesh, sm.pot, sm.paired.down.col(0), sm.paired.up.col(0),
             run.flags, b.gauge_origin, b.paired.down.col(0),
             b.paired.up.col(0), run.solver.delta_b, &b.minus);
  const Matrix3d g_plus =
      side_g(device, mesh, sp.pot, sp.paired.down.col(0), sp.paired.up.col(0),
             run.flags, b.gauge_origin, b.paired.down.col(0),
             b.paired.up.col(0), run.solver.delta_b, &b.plus);
  gs.alpha_minus = b.minus.alpha;
  gs.alpha_plus = b.plus.alpha;
  gs.g_prime = g_prime_fd(g_plus, g_minus, run.solver.delta_v);

  gs.principal = principal_factors(gs.g);
  try {
    gs.split = split_tmr_izr(gs.principal, gs.g_prime);
    gs.split_ok = true;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingularPrincipalFactor) throw;
    gs.split_ok = false;
    gs.split = GPrimeSplit{};
  }

  // Pattern verification, each mirror in its own adapted doublet basis. The
  // forbidden g' entries carry side-eigenstate noise amplified by
  // 1/(2 delta_v), so their tolerance has a floor above the g one.
  const double gp_tol = std::max(run.symmetry_tol, 1e-5);
  for (size_t c = 0; c < gs.constrained.size(); ++c) {
    const int mi = gs.constrained[c];
    const MirrorPlane& m = gs.mirrors[mi];
    Matrix3d g_m, gp_m;
    if (c == 0) {
      g_m = gs.g;  // the canonical basis is this mirror's adapted basis
      gp_m = gs.g_prime;
    } else {
      const SymmetricDoublet ad = symmetry_adapt(
          mesh, m, b.paired.down.col(0), b.paired.up.col(0));
      g_m = corner_g(doublet_m1(device, mesh, b.pot, run.flags, b.gauge_origin,
                                ad.down, ad.up, run.solver.delta_b));
      const Matrix3d gm = side_g(device, mesh, sm.pot, sm.paired.down.col(0),
                                 sm.paired.up.col(0), run.flags, b.gauge_origin,
                                 ad.down, ad.up, run.solver.delta_b, nullptr);
      const Matrix3d gp = side_g(device, mesh, sp.pot, sp.paired.down.col(0),
                                 sp.paired.up.col(0), run.flags, b.gauge_origin,
                                 ad.down, ad.up, run.solver.delta_b, nullptr);
      gp_m = g_prime_fd(gp, gm, run.solver.delta_v);
    }
    gs.g_reports.push_back(verify_pattern(g_m, g_pattern({m}), run.symmetry_tol));
    gs.gp_reports.push_back(verify_pattern(
        gp_m, g_prime_pattern({m}, {gs.drive_parity[mi]}), gp_tol));
  }

  std::vector<MirrorPlane> cmirrors;
  std::vector<Parity> cparity;
  for (int mi : gs.constrained) {
    cmirrors.push_back(gs.mirrors[mi]);
    cparity.push_back(gs.drive_parity[mi]);
  }
  gs.extinctions = predict_extinctions(g_pattern(cmirrors),
                                       g_prime_pattern(cmirrors, cparity));
  return b;
}

double RabiMap::max_f_rabi() const {
  double mx = 0.0;
  for (const auto& r : rows)
    if (!r.zero_larmor && std::isfinite(r.f_rabi_hz))
      mx = std::max(mx, r.f_rabi_hz);
  return mx;
}

RabiMap run_rabimap(const GMatrixSet& gset, const FieldConfig& field,
                    const MapConfig& map, int threads) {
  if (map.theta_steps < 2 || map.phi_steps < 1)
    fail(ErrorCode::InvalidConfig,
         "orientation grid needs at least 2 polar and 1 azimuthal step");
  const bool fixed = field.fixed_zeeman_ghz > 0.0;
  if (!fixed && !(field.b_tesla > 0.0))
    fail(ErrorCode::InvalidConfig, "field magnitude must be positive");
  if (fixed && field.b_tesla > 0.0)
    fail(ErrorCode::InvalidConfig,
         "field magnitude and Zeeman target are mutually exclusive");

  RabiMap out;
  out.theta_steps = map.theta_steps;
  out.phi_steps = map.phi_steps;
  out.fixed_zeeman_ghz = field.fixed_zeeman_ghz;
  out.v_ac = field.v_ac;
  out.config_hash = gset.config_hash;
  out.rows.resize(static_cast<size_t>(map.theta_steps) * map.phi_steps);

  const double target_hz = field.fixed_zeeman_ghz * 1e9;
  auto fill = [&](size_t lo, size_t hi) {
    for (size_t idx = lo; idx < hi; ++idx) {
      const int ti = static_cast<int>(idx) / map.phi_steps;
      const int pj = static_cast<int>(idx) % map.phi_steps;
      RabiMapRow& row = out.rows[idx];
      row.theta_deg = 180.0 * ti / (map.theta_steps - 1);
      // Azimuth covers [0, 180): the antipodal half adds no information.
      row.phi_deg = 180.0 * pj / map.phi_steps;
      const Vec3 bhat = field_direction(row.theta_deg, row.phi_deg);
      row.g_star = effective_g(gset.g, bhat);
      row.b_tesla =
          fixed ? target_hz /
                      (row.g_star * constants::mu_b * constants::mev_to_hz)
                : field.b_tesla;
      try {
        if (!(row.g_star > 1e-12))
          fail(ErrorCode::ZeroLarmor, "effective g vanishes");
        const RabiResult rr = rabi_from_g(gset.g, gset.g_prime, bhat,
                                          row.b_tesla, field.v_ac);
        row.f_larmor_hz = rr.f_larmor_hz;
        row.f_rabi_hz = rr.f_rabi_hz;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroLarmor) throw;
        row.zero_larmor = true;
        row.b_tesla = fixed ? kNan : field.b_tesla;
        row.f_larmor_hz = kNan;
        row.f_rabi_hz = kNan;
      }
    }
  };

  const size_t n = out.rows.size();
  const int nt = static_cast<int>(
      std::min<size_t>(std::max(1, threads), n));
  if (nt <= 1) {
    fill(0, n);
  } else {
    // Rows are written into disjoint preallocated slots, so the output is
    // identical for any thread count.
    std::vector<std::thread> pool;
    const size_t chunk = (n + nt - 1) / nt;
    for (int t = 0; t < nt; ++t) {
      const size_t lo = t * chunk, hi = std::min(n, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(fill, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

SweepTable run_sweep(const DeviceModel& device, const Mesh& mesh,
                     const RunConfig& run, SolveCache* cache) {
  const SweepConfig& sw = run.sweep;
  if (sw.kind == SweepConfig::Kind::None)
    fail(ErrorCode::InvalidConfig, "no sweep configured");
  if (sw.steps <= 0) fail(ErrorCode::InvalidConfig, "sweep grid is empty");
  if (sw.kind == SweepConfig::Kind::Voltage) {
    if (sw.gate.empty())
      fail(ErrorCode::InvalidConfig, "voltage sweep needs a gate");
    if (device.gate_index(sw.gate) < 0)
      fail(ErrorCode::UnknownGate,
           "sweep gate '" + sw.gate + "' does not exist");
  }

  SweepTable table;
  table.variable =
      sw.kind == SweepConfig::Kind::Voltage ? "bias_v" : "strain_percent";
  table.gate = sw.gate;
  table.pairs = run.solver.pairs;
  table.config_hash = run_fingerprint(device, mesh, run);

  const Vec3 bhat = field_direction(run.field.theta_deg, run.field.phi_deg);
  for (int i = 0; i < sw.steps; ++i) {
    const double x =
        sw.steps == 1 ? sw.from
                      : sw.from + (sw.to - sw.from) * i / (sw.steps - 1);
    SweepRow row;
    row.x = x;
    row.g_axis[0] = row.g_axis[1] = row.g_axis[2] = kNan;
    row.gp_frame_diag = Vec3(kNan, kNan, kNan);
    row.f_rabi_hz = kNan;
    row.dominant_share = kNan;
    row.hh_weight = kNan;
    try {
      DeviceModel dev_i = device;
      RunConfig run_i = run;
      if (sw.kind == SweepConfig::Kind::Voltage) {
        run_i.bias[sw.gate] = x;
      } else {
        dev_i.strain = biaxial_strain(x / 100.0, device.channel_material());
      }
      const SolveBundle b = run_solve(dev_i, mesh, run_i, cache);
      const GMatrixSet& gs = b.gset;

      for (Eigen::Index p = 1; p < gs.pair_energies.size(); ++p)
        row.gaps_mev.push_back(gs.pair_energies[0] - gs.pair_energies[p]);
      for (int a = 0; a < 3; ++a)
        row.g_axis[a] = effective_g(gs.g, Vec3::Unit(a));
      if (gs.split_ok) row.gp_frame_diag = gs.split.g_prime_frame.diagonal();

      double b_mag = run.field.b_tesla;
      if (run.field.fixed_zeeman_ghz > 0.0)
        b_mag = run.field.fixed_zeeman_ghz * 1e9 /
                (effective_g(gs.g, bhat) * constants::mu_b *
                 constants::mev_to_hz);
      try {
        row.f_rabi_hz =
            rabi_from_g(gs.g, gs.g_prime, bhat, b_mag, run.field.v_ac)
                .f_rabi_hz;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroLarmor) throw;
      }

      const SeriesResult series = perturbation_series(
          b.paired, b.m1_all, b.drive_all, b_mag * bhat, run.field.v_ac);
      double total = 0.0, top = 0.0;
      for (double c : series.contributions_hz) {
        total += c;
        top = std::max(top, c);
      }
      row.dominant_share = total > 0.0 ? top / total : 0.0;
      row.hh_weight = heavy_hole_weight(b.paired.down.col(0));
    } catch (const Error& e) {
      row.ok = false;
      row.error = e.what();
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

bool CheckReport::all_pass() const {
  for (const auto& r : rows)
    if (!r.pass) return false;
  return true;
}

CheckReport run_check(const DeviceModel& device, const Mesh& mesh,
                      const RunConfig& run, SolveCache* cache) {
  CheckReport rep;
  rep.config_hash = run_fingerprint(device, mesh, run);
  auto add = [&](const std::string& name, double measured, double tol,
                 const std::string& note = "") {
    rep.rows.push_back(CheckRow{name, measured, tol, measured <= tol, note});
  };
  auto skip = [&](const std::string& name, const std::string& why) {
    rep.rows.push_back(CheckRow{name, kNan, 0.0, true, "skipped: " + why});
  };

  const SolveBundle b = run_solve(device, mesh, run, cache);
  const GMatrixSet& gs = b.gset;
  const VecXc down0 = b.paired.down.col(0);
  const VecXc up0 = b.paired.up.col(0);
  const Vec3 bhat = field_direction(run.field.theta_deg, run.field.phi_deg);
  const double vac = run.field.v_ac;
  double b_mag = run.field.b_tesla;
  if (run.field.fixed_zeeman_ghz > 0.0)
    b_mag = run.field.fixed_zeeman_ghz * 1e9 /
            (effective_g(gs.g, bhat) * constants::mu_b * constants::mev_to_hz);

  add("poisson-flux-residual", max_flux_residual(device, mesh, b.pot), 1e-10,
      "relative control-volume flux imbalance");
  double worst_split = 0.0;
  for (double s : b.paired.splittings) worst_split = std::max(worst_split, s);
  add("kramers-pairing", worst_split, run.solver.pairing_tol,
      "meV, residual zero-field doublet splitting");

  const KpOperator op_b =
      assemble(device, mesh, b.pot, b_mag * bhat, run.flags, b.gauge_origin);
  add("hermiticity", op_b.hermiticity_error(), 1e-12,
      "assembled operator at the working field");

  double f_base = kNan;
  bool have_base = false;
  try {
    f_base = rabi_from_g(gs.g, gs.g_prime, bhat, b_mag, vac).f_rabi_hz;
    have_base = f_base > 0.0 && std::isfinite(f_base);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroLarmor) throw;
  }

  auto side_g_for = [&](const SidePoint& sp, const VecXc& rd, const VecXc& ru,
                        const Vec3& origin) {
    return side_g(device, mesh, sp.pot, sp.down, sp.up, run.flags, origin, rd,
                  ru, run.solver.delta_b, nullptr);
  };
  auto f_for_basis = [&](const VecXc& d, const VecXc& u, const Vec3& origin) {
    const Matrix3d g2 = corner_g(doublet_m1(device, mesh, b.pot, run.flags,
                                            origin, d, u, run.solver.delta_b));
    const Matrix3d gm = side_g_for(b.minus, d, u, origin);
    const Matrix3d gp = side_g_for(b.plus, d, u, origin);
    return rabi_from_g(g2, g_prime_fd(gp, gm, run.solver.delta_v), bhat, b_mag,
                       vac)
        .f_rabi_hz;
  };

  if (have_base) {
    // The doublet frame is a pure convention: any time-reversal-compatible
    // SU(2) rotation of (down, up) must leave the observables unchanged.
    std::mt19937_64 rng(20250825);
    std::normal_distribution<double> gauss;
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      Cplx a(gauss(rng), gauss(rng)), c(gauss(rng), gauss(rng));
      const double nn = std::sqrt(std::norm(a) + std::norm(c));
      a /= nn;
      c /= nn;
      const VecXc d2 = a * down0 + c * up0;
      const VecXc u2 = apply_time_reversal(d2);
      worst = std::max(worst, std::abs(f_for_basis(d2, u2, b.gauge_origin) -
                                       f_base) /
                                  f_base);
    }
    add("su2-frame-invariance", worst, 1e-10, "5 random doublet rotations");

    const Vec3 shifted = b.gauge_origin + Vec3(1.5, -2.0, 0.7);
    add("gauge-origin-invariance",
        std::abs(f_for_basis(down0, up0, shifted) - f_base) / f_base, 1e-8,
        "Peierls origin shifted by (1.5, -2.0, 0.7) nm");
  } else {
    skip("su2-frame-invariance", "Larmor frequency vanishes here");
    skip("gauge-origin-invariance", "Larmor frequency vanishes here");
  }

  {
    // Richardson step check: halving delta_v must reproduce g' when the
    // differencing is in its quadratic regime. A deliberately huge delta_v
    // fails here.
    SolverConfig side_cfg = run.solver;
    side_cfg.pairs = 1;
    side_cfg.tol = std::min(run.solver.tol, 1e-13);
    const double dv2 = run.solver.delta_v / 2.0;
    std::map<std::string, double> bm = run.bias, bp = run.bias;
    bm[run.drive_gate] -= dv2;
    bp[run.drive_gate] += dv2;
    const BiasSolve hm =
        solve_cached(device, mesh, bm, run.flags, side_cfg, cache);
    const BiasSolve hp =
        solve_cached(device, mesh, bp, run.flags, side_cfg, cache);
    const Matrix3d gmh =
        side_g(device, mesh, hm.pot, hm.paired.down.col(0),
               hm.paired.up.col(0), run.flags, b.gauge_origin, down0, up0,
               run.solver.delta_b, nullptr);
    const Matrix3d gph =
        side_g(device, mesh, hp.pot, hp.paired.down.col(0),
               hp.paired.up.col(0), run.flags, b.gauge_origin, down0, up0,
               run.solver.delta_b, nullptr);
    const Matrix3d gp_half = g_prime_fd(gph, gmh, dv2);
    add("gprime-richardson",
        (gs.g_prime - gp_half).norm() / std::max(gp_half.norm(), 1e-12), 0.02,
        "g' at delta_v vs delta_v/2");
  }

  if (!have_base) {
    skip("rabi-eq13-vs-eq3", "Larmor frequency vanishes here");
  } else if (op_b.dim() > 12000) {
    skip("rabi-eq13-vs-eq3", "dimension exceeds the dense reference cap");
  } else {
    const double brute = brute_force_rabi(op_b, b.drive, vac);
    add("rabi-eq13-vs-eq3", std::abs(f_base - brute) / brute,
        b_mag <= 0.25 ? 0.02 : 0.06,
        "g-matrix route vs exact two-level element at B");
  }

  try {
    const SeriesResult series = perturbation_series(
        b.paired, b.m1_all, b.drive_all, b_mag * bhat, vac);
    const double direct = rabi_direct(op_b, b.drive, vac, run.solver.seed);
    if (direct > 0.0)
      add("rabi-series-vs-direct",
          std::abs(series.f_rabi_hz - direct) / direct, 0.35,
          std::to_string(gs.pair_energies.size() - 1) +
              " excited doublets; the truncated window dominates the error "
              "and the series converges to the direct element as it grows");
    else
      skip("rabi-series-vs-direct", "direct matrix element vanishes");
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateExcitedState) throw;
    skip("rabi-series-vs-direct", "excited level degenerate with the qubit");
  }

  {
    const double b_lin = std::min(b_mag, 0.2);
    const KpOperator op_lin = assemble(device, mesh, b.pot, b_lin * bhat,
                                       run.flags, b.gauge_origin);
    const EigenSet top = solve_top_states(op_lin, 1, run.solver.seed,
                                          run.solver.max_iterations,
                                          run.solver.tol);
    const double gap = top.values[0] - top.values[1];
    const double expect = effective_g(gs.g, bhat) * constants::mu_b * b_lin;
    if (expect > 0.0)
      add("zeeman-linearity", std::abs(gap - expect) / expect, 2e-3,
          "doublet splitting at B vs g-matrix prediction");
    else
      skip("zeeman-linearity", "effective g vanishes here");
  }

  for (size_t c = 0; c < gs.constrained.size(); ++c) {
    const int mi = gs.constrained[c];
    const std::string tag = mirror_name(gs.mirrors[mi].axis);
    rep.rows.push_back(CheckRow{"g-pattern-" + tag, gs.g_reports[c].worst_ratio,
                                gs.g_reports[c].tol_rel, gs.g_reports[c].pass,
                                "largest forbidden entry over max|g|"});
    rep.rows.push_back(CheckRow{
        "gprime-pattern-" + tag, gs.gp_reports[c].worst_ratio,
        gs.gp_reports[c].tol_rel, gs.gp_reports[c].pass,
        "largest forbidden entry over max|g'|"});
  }

  if (have_base) {
    const double thetas[3] = {23.0, 71.0, 120.0};
    const double phis[3] = {10.0, 77.0, 151.0};
    double worst = 0.0;
    for (int s = 0; s < 3; ++s) {
      try {
        const double f1 = rabi_from_g(gs.g, gs.g_prime,
                                      field_direction(thetas[s], phis[s]),
                                      b_mag, vac)
                              .f_rabi_hz;
        const double f2 =
            rabi_from_g(gs.g, gs.g_prime,
                        field_direction(180.0 - thetas[s], phis[s] + 180.0),
                        b_mag, vac)
                .f_rabi_hz;
        if (f1 > 0.0) worst = std::max(worst, std::abs(f1 - f2) / f1);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroLarmor) throw;
      }
    }
    add("map-antipodal-symmetry", worst, 1e-12, "f_R(b) = f_R(-b)");
  } else {
    skip("map-antipodal-symmetry", "Larmor frequency vanishes here");
  }

  {
    const Matrix3d G = gs.g.transpose() * gs.g;
    Eigen::SelfAdjointEigenSolver<Matrix3d> es(G);
    const double scale = std::max(1.0, es.eigenvalues().maxCoeff());
    add("zeeman-tensor-psd",
        std::max(0.0, -es.eigenvalues().minCoeff() / scale), 1e-12,
        "smallest eigenvalue of G = g^T g");
    add("principal-reconstruction",
        (gs.principal.u * gs.principal.g_d.asDiagonal() *
             gs.principal.v.transpose() -
         gs.g)
                .norm() /
            std::max(gs.g.norm(), 1e-300),
        1e-12, "signed SVD rebuilds g");
    if (gs.split_ok) {
      // izr is defined as the exact complement of tmr; verifying it in that
      // form is bit-exact, whereas re-adding the parts would reintroduce one
      // rounding per entry.
      add("tmr-izr-completeness",
          (gs.split.izr - (gs.split.g_prime_frame - gs.split.tmr)).norm(), 0.0,
          "izr is the exact complement of tmr");
      add("izr-antisymmetric-factor",
          (gs.split.antisym + gs.split.antisym.transpose()).norm() /
              std::max(gs.split.antisym.norm(), 1e-12),
          1e-10, "diag(g_d) izr is antisymmetric");
    } else {
      skip("tmr-izr-completeness", "principal g-factor vanishes");
      skip("izr-antisymmetric-factor", "principal g-factor vanishes");
    }
  }

  if (have_base) {
    // Expected-behavior probe, not an equality: the Rabi frequency must
    // collapse when the gamma3 channels are switched off.
    CouplingFlags g3_flags = run.flags;
    g3_flags.gamma3_override = 0.0;
    SolverConfig s1 = run.solver;
    s1.pairs = 1;
    s1.tol = std::min(run.solver.tol, 1e-13);
    const BiasSolve base3 =
        solve_cached(device, mesh, run.bias, g3_flags, s1, cache);
    const Vec3 origin3 = default_gauge_origin(mesh, base3.pot);
    const VecXc d3 = base3.paired.down.col(0);
    const VecXc u3 = base3.paired.up.col(0);
    const Matrix3d g3 = corner_g(doublet_m1(device, mesh, base3.pot, g3_flags,
                                            origin3, d3, u3,
                                            run.solver.delta_b));
    std::map<std::string, double> bm = run.bias, bp = run.bias;
    bm[run.drive_gate] -= run.solver.delta_v;
    bp[run.drive_gate] += run.solver.delta_v;
    const BiasSolve m3 = solve_cached(device, mesh, bm, g3_flags, s1, cache);
    const BiasSolve p3 = solve_cached(device, mesh, bp, g3_flags, s1, cache);
    const Matrix3d g3m =
        side_g(device, mesh, m3.pot, m3.paired.down.col(0),
               m3.paired.up.col(0), g3_flags, origin3, d3, u3,
               run.solver.delta_b, nullptr);
    const Matrix3d g3p =
        side_g(device, mesh, p3.pot, p3.paired.down.col(0),
               p3.paired.up.col(0), g3_flags, origin3, d3, u3,
               run.solver.delta_b, nullptr);
    double f3 = 0.0;
    try {
      f3 = rabi_from_g(g3, g_prime_fd(g3p, g3m, run.solver.delta_v), bhat,
                       b_mag, vac)
               .f_rabi_hz;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroLarmor) throw;
    }
    add("gamma3-collapse", f3 / f_base, 0.05,
        "expected behavior: f_R collapses toward 0 when gamma3 = 0");
  } else {
    skip("gamma3-collapse", "Larmor frequency vanishes here");
  }

  return rep;
}

SymmetryReport run_symmetry(const DeviceModel& device, const Mesh& mesh,
                            const RunConfig& run) {
  for (const auto& [name, v] : run.bias)
    if (device.gate_index(name) < 0)
      fail(ErrorCode::UnknownGate, "bias names unknown gate '" + name + "'");

  SymmetryReport rep;
  rep.config_hash = run_fingerprint(device, mesh, run);
  rep.mirrors = detect_mirrors(device, mesh);
  const PotentialField pot = solve_poisson(device, mesh, run.bias);

  UnitResponse ur;
  bool have_drive = false;
  if (!run.drive_gate.empty()) {
    if (device.gate_index(run.drive_gate) < 0)
      fail(ErrorCode::UnknownGate,
           "drive gate '" + run.drive_gate + "' does not exist");
    ur = unit_response(device, mesh, run.drive_gate);
    have_drive = true;
  }

  std::vector<MirrorPlane> cm;
  std::vector<Parity> cp;
  for (const auto& m : rep.mirrors) {
    rep.bias_parity.push_back(scalar_parity(mesh, pot.values, m, kParityTol));
    rep.drive_parity.push_back(
        have_drive ? scalar_parity(mesh, ur.d1, m, kParityTol) : Parity::None);
    if (rep.bias_parity.back() == Parity::Even) {
      cm.push_back(m);
      cp.push_back(rep.drive_parity.back());
    }
  }
  rep.g_pattern = g_pattern(cm);
  rep.g_prime_pattern = g_prime_pattern(cm, cp);
  rep.extinctions = predict_extinctions(rep.g_pattern, rep.g_prime_pattern);
  return rep;
}

std::string gmatrix_to_json(const GMatrixSet& gs) {
  json j;
  j["schema"] = "kpg-gmatrix-1";
  j["config_hash"] = hash_hex(gs.config_hash);
  j["solve_hash"] = hash_hex(gs.solve_hash);
  j["b_tesla"] = gs.b_tesla;
  j["v_ac"] = gs.v_ac;
  j["delta_v"] = gs.delta_v;
  j["g"] = mat3_json(gs.g);
  j["g_prime"] = mat3_json(gs.g_prime);
  j["principal"] = {{"u", mat3_json(gs.principal.u)},
                    {"v", mat3_json(gs.principal.v)},
                    {"g_d", vec3_json(gs.principal.g_d)}};
  j["split"] = {{"valid", gs.split_ok},
                {"g_prime_frame", mat3_json(gs.split.g_prime_frame)},
                {"tmr", mat3_json(gs.split.tmr)},
                {"izr", mat3_json(gs.split.izr)},
                {"antisym", mat3_json(gs.split.antisym)}};
  j["pair_energies_mev"] = json::array();
  for (Eigen::Index p = 0; p < gs.pair_energies.size(); ++p)
    j["pair_energies_mev"].push_back(gs.pair_energies[p]);
  j["alpha_minus"] = gs.alpha_minus;
  j["alpha_plus"] = gs.alpha_plus;

  j["mirrors"] = json::array();
  for (const auto& m : gs.mirrors)
    j["mirrors"].push_back({{"axis", m.axis},
                            {"position", m.position},
                            {"name", mirror_name(m.axis)}});
  j["bias_parity"] = json::array();
  for (Parity p : gs.bias_parity) j["bias_parity"].push_back(parity_name(p));
  j["drive_parity"] = json::array();
  for (Parity p : gs.drive_parity) j["drive_parity"].push_back(parity_name(p));
  j["constrained"] = gs.constrained;
  j["g_reports"] = json::array();
  for (const auto& r : gs.g_reports) j["g_reports"].push_back(report_json(r));
  j["gp_reports"] = json::array();
  for (const auto& r : gs.gp_reports) j["gp_reports"].push_back(report_json(r));
  j["extinctions"] = {{"axes", gs.extinctions.axes},
                      {"all_orientations", gs.extinctions.all_orientations}};
  return j.dump(2) + "\n";
}

GMatrixSet gmatrix_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("schema").get<std::string>() != "kpg-gmatrix-1")
      fail(ErrorCode::ConfigParse, "unexpected g-matrix schema");
    GMatrixSet gs;
    gs.config_hash = hash_from_hex(j.at("config_hash").get<std::string>());
    gs.solve_hash = hash_from_hex(j.at("solve_hash").get<std::string>());
    gs.b_tesla = j.at("b_tesla").get<double>();
    gs.v_ac = j.at("v_ac").get<double>();
    gs.delta_v = j.at("delta_v").get<double>();
    gs.g = mat3_from(j.at("g"));
    gs.g_prime = mat3_from(j.at("g_prime"));
    gs.principal.u = mat3_from(j.at("principal").at("u"));
    gs.principal.v = mat3_from(j.at("principal").at("v"));
    gs.principal.g_d = vec3_from(j.at("principal").at("g_d"));
    gs.split_ok = j.at("split").at("valid").get<bool>();
    gs.split.g_prime_frame = mat3_from(j.at("split").at("g_prime_frame"));
    gs.split.tmr = mat3_from(j.at("split").at("tmr"));
    gs.split.izr = mat3_from(j.at("split").at("izr"));
    gs.split.antisym = mat3_from(j.at("split").at("antisym"));
    const auto& en = j.at("pair_energies_mev");
    gs.pair_energies.resize(static_cast<Eigen::Index>(en.size()));
    for (size_t p = 0; p < en.size(); ++p)
      gs.pair_energies[static_cast<Eigen::Index>(p)] = en.at(p).get<double>();
    gs.alpha_minus = j.at("alpha_minus").get<double>();
    gs.alpha_plus = j.at("alpha_plus").get<double>();
    for (const auto& m : j.at("mirrors"))
      gs.mirrors.push_back(MirrorPlane{m.at("axis").get<int>(),
                                       m.at("position").get<double>()});
    for (const auto& p : j.at("bias_parity"))
      gs.bias_parity.push_back(parity_from(p.get<std::string>()));
    for (const auto& p : j.at("drive_parity"))
      gs.drive_parity.push_back(parity_from(p.get<std::string>()));
    gs.constrained = j.at("constrained").get<std::vector<int>>();
    for (const auto& r : j.at("g_reports"))
      gs.g_reports.push_back(report_from(r));
    for (const auto& r : j.at("gp_reports"))
      gs.gp_reports.push_back(report_from(r));
    gs.extinctions.axes = j.at("extinctions").at("axes").get<std::vector<int>>();
    gs.extinctions.all_orientations =
        j.at("extinctions").at("all_orientations").get<bool>();
    return gs;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorCode::ConfigParse,
         std::string("cannot parse g-matrix JSON: ") + e.what());
  }
}

void write_rabimap_csv(std::ostream& os, const RabiMap& map) {
  os << "# config_hash=" << hash_hex(map.config_hash) << "\n";
  os << "theta_deg,phi_deg,g_star,b_tesla,f_larmor_hz,f_rabi_hz,status\n";
  for (const auto& r : map.rows)
    os << num(r.theta_deg) << ',' << num(r.phi_deg) << ',' << num(r.g_star)
       << ',' << num(r.b_tesla) << ',' << num(r.f_larmor_hz) << ','
       << num(r.f_rabi_hz) << ','
       << (r.zero_larmor ? "zero_larmor" : "ok") << "\n";
}

std::string rabimap_to_json(const RabiMap& map) {
  json j;
  j["schema"] = "kpg-rabimap-1";
  j["config_hash"] = hash_hex(map.config_hash);
  j["theta_steps"] = map.theta_steps;
  j["phi_steps"] = map.phi_steps;
  j["fixed_zeeman_ghz"] = map.fixed_zeeman_ghz;
  j["v_ac"] = map.v_ac;
  j["rows"] = json::array();
  for (const auto& r : map.rows)
    j["rows"].push_back({{"theta_deg", r.theta_deg},
                         {"phi_deg", r.phi_deg},
                         {"g_star", r.g_star},
                         {"b_tesla", r.b_tesla},
                         {"f_larmor_hz", r.f_larmor_hz},
                         {"f_rabi_hz", r.f_rabi_hz},
                         {"zero_larmor", r.zero_larmor}});
  return j.dump(2) + "\n";
}

void write_sweep_csv(std::ostream& os, const SweepTable& table) {
  os << "# config_hash=" << hash_hex(table.config_hash) << "\n";
  os << table.variable;
  for (int p = 1; p < table.pairs; ++p) os << ",gap_mev_" << p;
  os << ",g_x,g_y,g_z,gp_frame_xx,gp_frame_yy,gp_frame_zz,f_rabi_hz,"
        "dominant_share,hh_weight,status,error\n";
  for (const auto& r : table.rows) {
    os << num(r.x);
    for (int p = 1; p < table.pairs; ++p) {
      const size_t idx = static_cast<size_t>(p - 1);
      os << ',' << (idx < r.gaps_mev.size() ? num(r.gaps_mev[idx]) : "nan");
    }
    os << ',' << num(r.g_axis[0]) << ',' << num(r.g_axis[1]) << ','
       << num(r.g_axis[2]) << ',' << num(r.gp_frame_diag[0]) << ','
       << num(r.gp_frame_diag[1]) << ',' << num(r.gp_frame_diag[2]) << ','
       << num(r.f_rabi_hz) << ',' << num(r.dominant_share) << ','
       << num(r.hh_weight) << ',' << (r.ok ? "ok" : "failed") << ','
       << sanitize_csv(r.error) << "\n";
  }
}

std::string sweep_to_json(const SweepTable& table) {
  json j;
  j["schema"] = "kpg-sweep-1";
  j["config_hash"] = hash_hex(table.config_hash);
  j["variable"] = table.variable;
  j["gate"] = table.gate;
  j["pairs"] = table.pairs;
  j["rows"] = json::array();
  for (const auto& r : table.rows)
    j["rows"].push_back(
        {{"x", r.x},
         {"gaps_mev", r.gaps_mev},
         {"g_axis", json::array({r.g_axis[0], r.g_axis[1], r.g_axis[2]})},
         {"gp_frame_diag", vec3_json(r.gp_frame_diag)},
         {"f_rabi_hz", r.f_rabi_hz},
         {"dominant_share", r.dominant_share},
         {"hh_weight", r.hh_weight},
         {"ok", r.ok},
         {"error", r.error}});
  return j.dump(2) + "\n";
}

void write_check_csv(std::ostream& os, const CheckReport& report) {
  os << "# config_hash=" << hash_hex(report.config_hash) << "\n";
  os << "name,measured,tolerance,pass,note\n";
  for (const auto& r : report.rows)
    os << sanitize_csv(r.name) << ',' << num(r.measured) << ','
       << num(r.tolerance) << ',' << (r.pass ? "pass" : "FAIL") << ','
       << sanitize_csv(r.note) << "\n";
}

std::string check_to_json(const CheckReport& report) {
  json j;
  j["schema"] = "kpg-check-1";
  j["config_hash"] = hash_hex(report.config_hash);
  j["all_pass"] = report.all_pass();
  j["rows"] = json::array();
  for (const auto& r : report.rows)
    j["rows"].push_back({{"name", r.name},
                         {"measured", r.measured},
                         {"tolerance", r.tolerance},
                         {"pass", r.pass},
                         {"note", r.note}});
  return j.dump(2) + "\n";
}

std::string symmetry_to_json(const SymmetryReport& report) {
  json j;
  j["schema"] = "kpg-symmetry-1";
  j["config_hash"] = hash_hex(report.config_hash);
  j["mirrors"] = json::array();
  for (size_t i = 0; i < report.mirrors.size(); ++i)
    j["mirrors"].push_back(
        {{"axis", report.mirrors[i].axis},
         {"position", report.mirrors[i].position},
         {"name", mirror_name(report.mirrors[i].axis)},
         {"bias_parity", parity_name(report.bias_parity[i])},
         {"drive_parity", parity_name(report.drive_parity[i])}});
  j["g_pattern"] = pattern_json(report.g_pattern);
  j["g_prime_pattern"] = pattern_json(report.g_prime_pattern);
  j["extinctions"] = {{"axes", report.extinctions.axes},
                      {"all_orientations", report.extinctions.all_orientations}};
  return j.dump(2) + "\n";
}

}  // namespace kpg
