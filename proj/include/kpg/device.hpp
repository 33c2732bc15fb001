#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kpg/geometry.hpp"
#include "kpg/materials.hpp"

namespace kpg {

// Homogeneous channel strain, dimensionless. Symmetric by construction.
struct StrainTensor {
  double xx = 0.0, yy = 0.0, zz = 0.0;
  double yz = 0.0, xz = 0.0, xy = 0.0;

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d e;
    e << xx, xy, xz, xy, yy, yz, xz, yz, zz;
    return e;
  }
  bool is_zero(double tol = 0.0) const;
};

// ezz = -2 c12/c11 * e_par; off-diagonals zero. |e_par| < 0.05 required.
StrainTensor biaxial_strain(double eps_parallel, const MaterialParams& material);

struct Region {
  std::string name;
  std::string material;
  Box box;
};

struct Gate {
  std::string name;
  Box box;  // may be zero-thickness (electrode plate)
};

// Raw parsed device description (see docs/device-format.md).
struct DeviceSpec {
  int format_version = 1;
  std::map<std::string, MaterialParams> materials;
  std::vector<Region> regions;
  std::vector<Gate> gates;
  std::string channel_region;
  StrainTensor strain;
  // If set, strain is derived from the channel material as biaxial(eps).
  std::optional<double> biaxial_eps_parallel;
  bool periodic_x = false;
  double mesh_spacing = 1.0;  // nm, target
};

// Validated geometry. Device axes: x along the wire, z out of the substrate
// plane. Immutable after construction and safe to share across threads.
struct DeviceModel {
  std::vector<Region> regions;
  std::vector<MaterialParams> region_materials;  // parallel to regions
  std::vector<Gate> gates;
  int channel_index = -1;  // into regions
  StrainTensor strain;
  Box bounds;  // simulation box = union of the tiled regions
  bool periodic_x = false;
  double mesh_spacing = 1.0;

  const Region& channel() const { return regions[channel_index]; }
  const MaterialParams& channel_material() const {
    return region_materials[channel_index];
  }
  int gate_index(const std::string& name) const;  // -1 if absent

  // Stable content hash over geometry, materials and strain (cache keys).
  uint64_t content_hash() const;
};

// Validates the spec: well-formed boxes, known materials, non-overlapping
// regions that tile the bounding box, gates touching at least one region.
DeviceModel build_device(const DeviceSpec& spec);

}  // namespace kpg
