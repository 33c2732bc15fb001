#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kpg/config.hpp"
#include "kpg/coupling.hpp"
#include "kpg/device.hpp"
#include "kpg/mesh.hpp"

namespace kpg {

// Stored-artifact format revision; part of every key, so a bump silently
// invalidates all previous entries instead of misreading them.
inline constexpr uint32_t kCacheFormatVersion = 1;

// Code revision covering the physics pipeline. Any change that can alter
// solved numbers must bump this string.
inline constexpr const char* kCodeVersion = "1.0.0";

// One warm-startable bias point: the node potential plus the paired
// eigensolution, stored bit-exact.
struct CachedSolve {
  std::map<std::string, double> gate_voltages;
  std::vector<double> potential;  // volts per mesh node
  Eigen::VectorXd energies;       // meV, descending, one per doublet
  Eigen::VectorXd splittings;     // residual intra-doublet gaps (meV)
  Eigen::MatrixXcd down, up;      // channel-space states, column per doublet
};

// Content-addressed store of solve artifacts under one directory.
// Default-constructed (empty path) caches are disabled and never hit.
class SolveCache {
 public:
  SolveCache() = default;
  explicit SolveCache(std::string directory);

  bool enabled() const { return !dir_.empty(); }

  // nullopt on miss or when disabled; CacheCorrupt when the entry exists
  // but fails the header, size or checksum validation.
  std::optional<CachedSolve> load(uint64_t key);
  void store(uint64_t key, const CachedSolve& entry);

  int hits() const { return hits_; }
  int misses() const { return misses_; }
  std::string entry_path(uint64_t key) const;

 private:
  std::string dir_;
  int hits_ = 0;
  int misses_ = 0;
};

// Everything that determines the eigensolution at one bias point, folded
// into one key: device content, mesh content, gate voltages, coupling
// flags, solver knobs, and the format/code versions.
uint64_t solve_cache_key(const DeviceModel& device, const Mesh& mesh,
                         const std::map<std::string, double>& bias,
                         const CouplingFlags& flags,
                         const SolverConfig& solver);

}  // namespace kpg
