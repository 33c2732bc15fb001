// Python bindings for the simulator pipeline.  Every operation takes a
// device configuration file and returns the same JSON documents the command
// line tool writes, so results are plain Python dicts after json.loads; the
// g-matrix pair is additionally exposed as numpy arrays.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <utility>

#include "kpg/cache.hpp"
#include "kpg/config.hpp"
#include "kpg/device.hpp"
#include "kpg/errors.hpp"
#include "kpg/mesh.hpp"
#include "kpg/pipeline.hpp"

namespace py = pybind11;

namespace {

struct Session {
  kpg::DeviceModel model;
  kpg::Mesh mesh;
  kpg::RunConfig run;
  kpg::SolveCache cache;
};

Session open_session(const std::string& config_path,
                     const std::string& cache_dir) {
  kpg::ParsedConfig cfg = kpg::parse_config_file(config_path);
  Session s;
  s.model = kpg::build_device(cfg.device);
  s.mesh = kpg::build_mesh(s.model, cfg.device.mesh_spacing);
  s.run = cfg.run;
  if (!cache_dir.empty()) s.cache = kpg::SolveCache(cache_dir);
  return s;
}

kpg::SolveCache* cache_of(Session& s) {
  return s.cache.enabled() ? &s.cache : nullptr;
}

std::string solve_json(const std::string& config, const std::string& cache) {
  Session s = open_session(config, cache);
  return kpg::gmatrix_to_json(
      kpg::run_solve(s.model, s.mesh, s.run, cache_of(s)).gset);
}

std::string rabimap_json(const std::string& config, const std::string& cache,
                         int threads) {
  Session s = open_session(config, cache);
  const kpg::SolveBundle b = kpg::run_solve(s.model, s.mesh, s.run, cache_of(s));
  return kpg::rabimap_to_json(
      kpg::run_rabimap(b.gset, s.run.field, s.run.map, threads));
}

std::string sweep_json(const std::string& config, const std::string& cache) {
  Session s = open_session(config, cache);
  return kpg::sweep_to_json(kpg::run_sweep(s.model, s.mesh, s.run, cache_of(s)));
}

std::string check_json(const std::string& config, const std::string& cache) {
  Session s = open_session(config, cache);
  return kpg::check_to_json(kpg::run_check(s.model, s.mesh, s.run, cache_of(s)));
}

std::string symmetry_json(const std::string& config) {
  Session s = open_session(config, "");
  return kpg::symmetry_to_json(kpg::run_symmetry(s.model, s.mesh, s.run));
}

std::pair<kpg::Matrix3d, kpg::Matrix3d> g_matrices(const std::string& config,
                                                   const std::string& cache) {
  Session s = open_session(config, cache);
  const kpg::GMatrixSet gs =
      kpg::run_solve(s.model, s.mesh, s.run, cache_of(s)).gset;
  return {gs.g, gs.g_prime};
}

std::string config_hash(const std::string& config) {
  Session s = open_session(config, "");
  return kpg::hash_hex(kpg::run_fingerprint(s.model, s.mesh, s.run));
}

}  // namespace

PYBIND11_MODULE(_kpg, m) {
  m.doc() =
      "g-matrix and Rabi-map simulator for electrically driven hole spin "
      "qubits; all documents match the command line tool's JSON output";

  static py::exception<kpg::Error> exc(m, "SimulationError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const kpg::Error& e) {
      if (kpg::is_validation_error(e.code()))
        PyErr_SetString(PyExc_ValueError, e.what());
      else
        exc(e.what());
    }
  });

  m.def("solve_json", &solve_json, py::arg("config"), py::arg("cache") = "",
        py::call_guard<py::gil_scoped_release>(),
        "Solve the device and return the g-matrix report as JSON text");
  m.def("rabimap_json", &rabimap_json, py::arg("config"), py::arg("cache") = "",
        py::arg("threads") = 1, py::call_guard<py::gil_scoped_release>(),
        "Larmor and Rabi frequencies over field orientations, JSON text");
  m.def("sweep_json", &sweep_json, py::arg("config"), py::arg("cache") = "",
        py::call_guard<py::gil_scoped_release>(),
        "Gate-voltage or strain sweep, JSON text");
  m.def("check_json", &check_json, py::arg("config"), py::arg("cache") = "",
        py::call_guard<py::gil_scoped_release>(),
        "Physics invariant audit, JSON text");
  m.def("symmetry_json", &symmetry_json, py::arg("config"),
        py::call_guard<py::gil_scoped_release>(),
        "Mirror symmetry survey and forbidden-entry prediction, JSON text");
  m.def("g_matrices", &g_matrices, py::arg("config"), py::arg("cache") = "",
        py::call_guard<py::gil_scoped_release>(),
        "Pair (g, g_prime) of 3x3 arrays for the configured device");
  m.def("config_hash", &config_hash, py::arg("config"),
        py::call_guard<py::gil_scoped_release>(),
        "Hex fingerprint covering device, mesh and run settings");
}
