#include "kpg/device.hpp"

#include <cmath>
#include <limits>

#include "kpg/errors.hpp"
#include "kpg/hash.hpp"

namespace kpg {

bool StrainTensor::is_zero(double tol) const {
  return std::abs(xx) <= tol && std::abs(yy) <= tol && std::abs(zz) <= tol &&
         std::abs(yz) <= tol && std::abs(xz) <= tol && std::abs(xy) <= tol;
}

StrainTensor biaxial_strain(double eps_parallel, const MaterialParams& material) {
  if (!(std::abs(eps_parallel) < 0.05))
    fail(ErrorCode::InvalidConfig,
         "biaxial strain magnitude must be < 5%, got " +
             std::to_string(eps_parallel));
  if (!(material.c11 > 0.0))
    fail(ErrorCode::InvalidConfig,
         "material '" + material.name + "' has no elastic constants");
  StrainTensor e;
  e.xx = eps_parallel;
  e.yy = eps_parallel;
  e.zz = -2.0 * material.c12 * eps_parallel / material.c11;
  return e;
}

namespace {

void check_region_box(const Region& r) {
  for (int a = 0; a < 3; ++a) {
    if (!(r.box.extent(a) > 0.0))
      fail(ErrorCode::NegativeDimension,
           "region '" + r.name + "' has non-positive extent along axis " +
               std::to_string(a));
  }
}

Box bounding_box(const std::vector<Region>& regions) {
  Box b = regions.front().box;
  for (const auto& r : regions) {
    b.lo = b.lo.cwiseMin(r.box.lo);
    b.hi = b.hi.cwiseMax(r.box.hi);
  }
  return b;
}

}  // namespace

int DeviceModel::gate_index(const std::string& name) const {
  for (size_t i = 0; i < gates.size(); ++i)
    if (gates[i].name == name) return static_cast<int>(i);
  return -1;
}

uint64_t DeviceModel::content_hash() const {
  Hasher h;
  h.add(std::string("device"));
  for (size_t i = 0; i < regions.size(); ++i) {
    const auto& r = regions[i];
    const auto& m = region_materials[i];
    h.add(r.name);
    for (int a = 0; a < 3; ++a) {
      h.add(r.box.lo[a]);
      h.add(r.box.hi[a]);
    }
    h.add(m.name);
    h.add(m.gamma1);
    h.add(m.gamma2);
    h.add(m.gamma3);
    h.add(m.kappa);
    h.add(m.delta_so);
    h.add(m.permittivity);
    h.add(m.c11);
    h.add(m.c12);
    h.add(m.b_v);
    h.add(m.d_v);
    h.add(m.semiconductor);
  }
  for (const auto& g : gates) {
    h.add(g.name);
    for (int a = 0; a < 3; ++a) {
      h.add(g.box.lo[a]);
      h.add(g.box.hi[a]);
    }
  }
  h.add(channel_index);
  h.add(strain.xx);
  h.add(strain.yy);
  h.add(strain.zz);
  h.add(strain.yz);
  h.add(strain.xz);
  h.add(strain.xy);
  h.add(periodic_x);
  h.add(mesh_spacing);
  return h.value();
}

DeviceModel build_device(const DeviceSpec& spec) {
  if (spec.format_version != 1)
    fail(ErrorCode::ConfigParse,
         "unsupported format_version " + std::to_string(spec.format_version));
  if (spec.regions.empty())
    fail(ErrorCode::InvalidConfig, "device needs at least one region");

  DeviceModel dev;
  dev.regions = spec.regions;
  dev.gates = spec.gates;
  dev.periodic_x = spec.periodic_x;
  dev.mesh_spacing = spec.mesh_spacing;

  for (const auto& r : dev.regions) {
    check_region_box(r);
    auto it = spec.materials.find(r.material);
    MaterialParams mat;
    if (it != spec.materials.end()) {
      mat = it->second;
    } else if (has_material_preset(r.material)) {
      mat = material_preset(r.material);
    } else {
      fail(ErrorCode::UnknownMaterial,
           "region '" + r.name + "' references unknown material '" +
               r.material + "'");
    }
    mat.validate();
    dev.region_materials.push_back(mat);
  }

  for (size_t i = 0; i < dev.regions.size(); ++i)
    for (size_t j = i + 1; j < dev.regions.size(); ++j)
      if (Box::interiors_overlap(dev.regions[i].box, dev.regions[j].box))
        fail(ErrorCode::OverlappingRegions,
             "regions '" + dev.regions[i].name + "' and '" +
                 dev.regions[j].name + "' overlap");

  dev.bounds = bounding_box(dev.regions);
  double vol = 0.0;
  for (const auto& r : dev.regions) vol += r.box.volume();
  double bvol = dev.bounds.volume();
  if (std::abs(vol - bvol) > 1e-9 * bvol)
    fail(ErrorCode::RegionGap,
         "regions do not tile their bounding box (covered " +
             std::to_string(vol) + " of " + std::to_string(bvol) + " nm^3)");

  for (size_t i = 0; i < dev.regions.size(); ++i) {
    if (dev.regions[i].name == spec.channel_region) {
      dev.channel_index = static_cast<int>(i);
      break;
    }
  }
  if (dev.channel_index < 0)
    fail(ErrorCode::InvalidConfig,
         "channel region '" + spec.channel_region + "' not found");
  if (!dev.channel_material().semiconductor)
    fail(ErrorCode::InvalidConfig,
         "channel region '" + spec.channel_region +
             "' must use a semiconductor material");
  if (dev.periodic_x) {
    const Box& cb = dev.channel().box;
    if (std::abs(cb.lo[0] - dev.bounds.lo[0]) > 1e-9 ||
        std::abs(cb.hi[0] - dev.bounds.hi[0]) > 1e-9)
      fail(ErrorCode::InvalidConfig,
           "periodic_x requires the channel to span the full x extent");
  }

  for (const auto& g : dev.gates) {
    if (!g.box.well_formed())
      fail(ErrorCode::NegativeDimension, "gate '" + g.name + "' box inverted");
    bool touched = false;
    for (const auto& r : dev.regions)
      if (g.box.touches(r.box)) {
        touched = true;
        break;
      }
    if (!touched)
      fail(ErrorCode::DanglingGate,
           "gate '" + g.name + "' does not touch any region");
    if (Box::interiors_overlap(g.box, dev.channel().box))
      fail(ErrorCode::InvalidConfig,
           "gate '" + g.name + "' penetrates the channel");
  }
  for (size_t i = 0; i < dev.gates.size(); ++i)
    for (size_t j = i + 1; j < dev.gates.size(); ++j)
      if (dev.gates[i].name == dev.gates[j].name)
        fail(ErrorCode::InvalidConfig,
             "duplicate gate name '" + dev.gates[i].name + "'");

  if (spec.biaxial_eps_parallel) {
    dev.strain =
        biaxial_strain(*spec.biaxial_eps_parallel, dev.channel_material());
  } else {
    dev.strain = spec.strain;
  }
  return dev;
}

}  // namespace kpg
