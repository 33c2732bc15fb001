#include "kpg/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kpg/errors.hpp"
#include "kpg/hash.hpp"

namespace kpg {

uint64_t RunConfig::content_hash() const {
  Hasher h;
  h.add(std::string("run"));
  for (const auto& [g, v] : bias) {
    h.add(g);
    h.add(v);
  }
  h.add(drive_gate);
  h.add(field.b_tesla);
  h.add(field.theta_deg);
  h.add(field.phi_deg);
  h.add(field.v_ac);
  h.add(field.fixed_zeeman_ghz);
  h.add(solver.pairs);
  h.add(solver.delta_v);
  h.add(solver.delta_b);
  h.add(solver.pairing_tol);
  h.add(solver.tol);
  h.add(solver.seed);
  h.add(flags.peierls_on);
  h.add(flags.bloch_zeeman_on);
  h.add(flags.strain_on);
  h.add(flags.gamma3_override.has_value());
  h.add(flags.gamma3_override.value_or(0.0));
  h.add(static_cast<int>(sweep.kind));
  h.add(sweep.gate);
  h.add(sweep.from);
  h.add(sweep.to);
  h.add(sweep.steps);
  h.add(map.theta_steps);
  h.add(map.phi_steps);
  h.add(symmetry_tol);
  return h.value();
}

namespace {

struct Cursor {
  std::string source;
  int line = 0;
  [[noreturn]] void fail_here(const std::string& msg) const {
    fail(ErrorCode::ConfigParse,
         source + ":" + std::to_string(line) + ": " + msg);
  }
};

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const Cursor& c, const std::string& v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) c.fail_here("trailing characters in number '" + v + "'");
    return d;
  } catch (const std::logic_error&) {
    c.fail_here("expected a number, got '" + v + "'");
  }
}

int to_int(const Cursor& c, const std::string& v) {
  double d = to_double(c, v);
  if (std::abs(d - std::round(d)) > 1e-9)
    c.fail_here("expected an integer, got '" + v + "'");
  return static_cast<int>(std::llround(d));
}

bool to_bool(const Cursor& c, const std::string& v) {
  if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
  if (v == "off" || v == "false" || v == "no" || v == "0") return false;
  c.fail_here("expected a boolean, got '" + v + "'");
}

Box to_box(const Cursor& c, const std::string& v) {
  std::istringstream is(v);
  double w[6];
  for (double& x : w)
    if (!(is >> x)) c.fail_here("box needs 6 numbers: x0 x1 y0 y1 z0 z1");
  std::string rest;
  if (is >> rest) c.fail_here("box needs exactly 6 numbers");
  Box b;
  b.lo = {w[0], w[2], w[4]};
  b.hi = {w[1], w[3], w[5]};
  return b;
}

}  // namespace

ParsedConfig parse_config_text(const std::string& text,
                               const std::string& source_name) {
  ParsedConfig cfg;
  DeviceSpec& dev = cfg.device;
  RunConfig& run = cfg.run;
  bool saw_version = false;

  std::string section;     // current section kind
  std::string sec_name;    // current section instance name
  MaterialParams cur_mat;
  Region cur_region;
  Gate cur_gate;
  bool strain_components = false;

  Cursor cur{source_name, 0};

  auto finalize_section = [&]() {
    if (section == "material") {
      dev.materials[cur_mat.name] = cur_mat;
    } else if (section == "region") {
      if (cur_region.material.empty())
        cur.fail_here("region '" + cur_region.name + "' missing material");
      if ((cur_region.box.hi - cur_region.box.lo).norm() == 0.0)
        cur.fail_here("region '" + cur_region.name + "' missing box");
      dev.regions.push_back(cur_region);
    } else if (section == "gate") {
      dev.gates.push_back(cur_gate);
    }
  };

  std::istringstream stream(text);
  std::string raw;
  while (std::getline(stream, raw)) {
    ++cur.line;
    std::string line = raw;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') cur.fail_here("unterminated section header");
      finalize_section();
      std::string inner = trim(line.substr(1, line.size() - 2));
      size_t sp = inner.find_first_of(" \t");
      section = sp == std::string::npos ? inner : inner.substr(0, sp);
      sec_name = sp == std::string::npos ? "" : trim(inner.substr(sp));
      if (section == "material") {
        if (sec_name.empty()) cur.fail_here("[material] needs a name");
        cur_mat = has_material_preset(sec_name) ? material_preset(sec_name)
                                                : MaterialParams{};
        cur_mat.name = sec_name;
      } else if (section == "region") {
        if (sec_name.empty()) cur.fail_here("[region] needs a name");
        cur_region = Region{};
        cur_region.name = sec_name;
      } else if (section == "gate") {
        if (sec_name.empty()) cur.fail_here("[gate] needs a name");
        cur_gate = Gate{};
        cur_gate.name = sec_name;
      } else if (section != "channel" && section != "strain" &&
                 section != "mesh" && section != "bias" &&
                 section != "field" && section != "solver" &&
                 section != "drive" && section != "flags" &&
                 section != "sweep" && section != "map" &&
                 section != "symmetry" && section != "output") {
        cur.fail_here("unknown section [" + section + "]");
      }
      continue;
    }

    size_t eq = line.find('=');
    if (eq == std::string::npos) cur.fail_here("expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty()) cur.fail_here("empty key or value");

    if (section.empty()) {
      if (key == "format_version") {
        dev.format_version = to_int(cur, val);
        saw_version = true;
      } else {
        cur.fail_here("key '" + key + "' outside any section");
      }
    } else if (section == "material") {
      if (key == "preset") {
        std::string nm = cur_mat.name;
        cur_mat = material_preset(val);
        cur_mat.name = nm;
      } else if (key == "gamma1") cur_mat.gamma1 = to_double(cur, val);
      else if (key == "gamma2") cur_mat.gamma2 = to_double(cur, val);
      else if (key == "gamma3") cur_mat.gamma3 = to_double(cur, val);
      else if (key == "kappa") cur_mat.kappa = to_double(cur, val);
      else if (key == "delta_so") cur_mat.delta_so = to_double(cur, val);
      else if (key == "permittivity") cur_mat.permittivity = to_double(cur, val);
      else if (key == "c11") cur_mat.c11 = to_double(cur, val);
      else if (key == "c12") cur_mat.c12 = to_double(cur, val);
      else if (key == "b_v") cur_mat.b_v = to_double(cur, val);
      else if (key == "d_v") cur_mat.d_v = to_double(cur, val);
      else if (key == "semiconductor") cur_mat.semiconductor = to_bool(cur, val);
      else cur.fail_here("unknown material key '" + key + "'");
    } else if (section == "region") {
      if (key == "material") cur_region.material = val;
      else if (key == "box") cur_region.box = to_box(cur, val);
      else cur.fail_here("unknown region key '" + key + "'");
    } else if (section == "gate") {
      if (key == "box") cur_gate.box = to_box(cur, val);
      else cur.fail_here("unknown gate key '" + key + "'");
    } else if (section == "channel") {
      if (key == "region") dev.channel_region = val;
      else if (key == "periodic_x") dev.periodic_x = to_bool(cur, val);
      else cur.fail_here("unknown channel key '" + key + "'");
    } else if (section == "strain") {
      if (key == "biaxial_percent") {
        dev.biaxial_eps_parallel = to_double(cur, val) / 100.0;
      } else if (key == "exx" || key == "eyy" || key == "ezz" ||
                 key == "eyz" || key == "exz" || key == "exy") {
        strain_components = true;
        double v = to_double(cur, val);
        if (key == "exx") dev.strain.xx = v;
        else if (key == "eyy") dev.strain.yy = v;
        else if (key == "ezz") dev.strain.zz = v;
        else if (key == "eyz") dev.strain.yz = v;
        else if (key == "exz") dev.strain.xz = v;
        else dev.strain.xy = v;
      } else {
        cur.fail_here("unknown strain key '" + key + "'");
      }
    } else if (section == "mesh") {
      if (key == "spacing") dev.mesh_spacing = to_double(cur, val);
      else cur.fail_here("unknown mesh key '" + key + "'");
    } else if (section == "bias") {
      run.bias[key] = to_double(cur, val);
    } else if (section == "field") {
      if (key == "b") run.field.b_tesla = to_double(cur, val);
      else if (key == "theta") run.field.theta_deg = to_double(cur, val);
      else if (key == "phi") run.field.phi_deg = to_double(cur, val);
      else if (key == "vac") run.field.v_ac = to_double(cur, val);
      else if (key == "fixed_zeeman_ghz")
        run.field.fixed_zeeman_ghz = to_double(cur, val);
      else cur.fail_here("unknown field key '" + key + "'");
    } else if (section == "solver") {
      if (key == "pairs") run.solver.pairs = to_int(cur, val);
      else if (key == "delta_v") run.solver.delta_v = to_double(cur, val);
      else if (key == "delta_b") run.solver.delta_b = to_double(cur, val);
      else if (key == "pairing_tol") run.solver.pairing_tol = to_double(cur, val);
      else if (key == "tol") run.solver.tol = to_double(cur, val);
      else if (key == "seed") run.solver.seed = static_cast<uint64_t>(to_int(cur, val));
      else if (key == "max_iterations") run.solver.max_iterations = to_int(cur, val);
      else cur.fail_here("unknown solver key '" + key + "'");
    } else if (section == "drive") {
      if (key == "gate") run.drive_gate = val;
      else cur.fail_here("unknown drive key '" + key + "'");
    } else if (section == "flags") {
      if (key == "peierls") run.flags.peierls_on = to_bool(cur, val);
      else if (key == "bloch") run.flags.bloch_zeeman_on = to_bool(cur, val);
      else if (key == "strain") run.flags.strain_on = to_bool(cur, val);
      else if (key == "gamma3_override")
        run.flags.gamma3_override = to_double(cur, val);
      else cur.fail_here("unknown flags key '" + key + "'");
    } else if (section == "sweep") {
      if (key == "gate") {
        run.sweep.kind = SweepConfig::Kind::Voltage;
        run.sweep.gate = val;
      } else if (key == "strain_from") {
        run.sweep.kind = SweepConfig::Kind::Strain;
        run.sweep.from = to_double(cur, val);
      } else if (key == "strain_to") {
        run.sweep.kind = SweepConfig::Kind::Strain;
        run.sweep.to = to_double(cur, val);
      } else if (key == "from") run.sweep.from = to_double(cur, val);
      else if (key == "to") run.sweep.to = to_double(cur, val);
      else if (key == "steps") run.sweep.steps = to_int(cur, val);
      else cur.fail_here("unknown sweep key '" + key + "'");
    } else if (section == "map") {
      if (key == "theta_steps") run.map.theta_steps = to_int(cur, val);
      else if (key == "phi_steps") run.map.phi_steps = to_int(cur, val);
      else cur.fail_here("unknown map key '" + key + "'");
    } else if (section == "symmetry") {
      if (key == "tol") run.symmetry_tol = to_double(cur, val);
      else cur.fail_here("unknown symmetry key '" + key + "'");
    } else if (section == "output") {
      if (key == "dir") run.output_dir = val;
      else cur.fail_here("unknown output key '" + key + "'");
    }
  }
  finalize_section();

  if (!saw_version)
    fail(ErrorCode::ConfigParse, source_name + ": missing format_version");
  if (dev.biaxial_eps_parallel && strain_components)
    fail(ErrorCode::ConfigParse,
         source_name + ": give either biaxial_percent or strain components");
  return cfg;
}

ParsedConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f)
    fail(ErrorCode::ConfigParse, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), path);
}

}  // namespace kpg
