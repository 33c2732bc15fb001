#include "kpg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "kpg/errors.hpp"
#include "kpg/hash.hpp"

namespace kpg {

int64_t Mesh::neighbor(int i, int j, int k, int dx, int dy, int dz) const {
  int ii = i + dx, jj = j + dy, kk = k + dz;
  if (periodic_x) {
    if (ii < 0) ii += n[0];
    if (ii >= n[0]) ii -= n[0];
  } else if (ii < 0 || ii >= n[0]) {
    return -1;
  }
  if (jj < 0 || jj >= n[1] || kk < 0 || kk >= n[2]) return -1;
  return lin(ii, jj, kk);
}

int64_t Mesh::channel_neighbor(int i, int j, int k, int dx, int dy,
                               int dz) const {
  int64_t nb = neighbor(i, j, k, dx, dy, dz);
  if (nb < 0 || !channel[nb]) return -1;
  return nb;
}

uint64_t Mesh::content_hash() const {
  Hasher hh;
  hh.add(std::string("mesh"));
  for (int a = 0; a < 3; ++a) {
    hh.add(origin[a]);
    hh.add(h[a]);
    hh.add(n[a]);
  }
  hh.add(periodic_x);
  hh.bytes(region_of.data(), region_of.size() * sizeof(int32_t));
  hh.bytes(gate_of.data(), gate_of.size() * sizeof(int32_t));
  hh.bytes(channel.data(), channel.size());
  return hh.value();
}

namespace {

// Per axis: pick the cell count whose spacing is closest to the target,
// within +-25%, such that every breakpoint lies on a plane.
void choose_axis(double lo, double hi, const std::vector<double>& breaks,
                 double target, int axis, double& h_out, int& cells_out) {
  double span = hi - lo;
  int n_min = std::max<int>(1, static_cast<int>(std::ceil(span / (1.25 * target) - 1e-12)));
  int n_max = static_cast<int>(std::floor(span / (0.75 * target) + 1e-12));
  if (n_max < n_min)
    fail(ErrorCode::SpacingTooCoarse,
         "axis " + std::to_string(axis) + ": no cell count within 25% of " +
             std::to_string(target) + " nm over a span of " +
             std::to_string(span) + " nm");

  std::vector<int> candidates;
  for (int n = n_min; n <= n_max; ++n) candidates.push_back(n);
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](int a, int b) {
                     return std::abs(span / a - target) <
                            std::abs(span / b - target);
                   });
  for (int n : candidates) {
    double h = span / n;
    bool ok = true;
    for (double b : breaks) {
      double r = (b - lo) / h;
      if (std::abs(r - std::round(r)) > 1e-6) {
        ok = false;
        break;
      }
    }
    if (ok) {
      h_out = h;
      cells_out = n;
      return;
    }
  }
  fail(ErrorCode::SpacingTooCoarse,
       "axis " + std::to_string(axis) +
           ": no spacing within 25% of target aligns all region boundaries");
}

}  // namespace

Mesh build_mesh(const DeviceModel& device, double target_spacing) {
  if (!(target_spacing > 0.0))
    fail(ErrorCode::SpacingTooCoarse, "target spacing must be positive");
  for (const auto& r : device.regions) {
    if (!(target_spacing < r.box.min_extent()))
      fail(ErrorCode::SpacingTooCoarse,
           "target spacing " + std::to_string(target_spacing) +
               " nm is not smaller than region '" + r.name + "'");
  }

  Mesh mesh;
  mesh.periodic_x = device.periodic_x;

  for (int a = 0; a < 3; ++a) {
    std::set<double> bp;
    auto add_box = [&](const Box& b) {
      bp.insert(b.lo[a]);
      bp.insert(b.hi[a]);
    };
    for (const auto& r : device.regions) add_box(r.box);
    for (const auto& g : device.gates) add_box(g.box);
    std::vector<double> breaks(bp.begin(), bp.end());

    double h = 0.0;
    int cells = 0;
    choose_axis(device.bounds.lo[a], device.bounds.hi[a], breaks,
                target_spacing, a, h, cells);
    mesh.origin[a] = device.bounds.lo[a];
    mesh.h[a] = h;
    mesh.n[a] = (a == 0 && mesh.periodic_x) ? cells : cells + 1;
    if (mesh.n[a] < 3)
      fail(ErrorCode::SpacingTooCoarse,
           "axis " + std::to_string(a) + ": fewer than 3 nodes");
  }

  int64_t nn = mesh.num_nodes();
  mesh.region_of.assign(nn, -1);
  mesh.gate_of.assign(nn, -1);
  mesh.channel.assign(nn, 0);
  mesh.channel_index.assign(nn, -1);

  const Box& cb = device.channel().box;
  double ctol = 1e-6 * std::min({mesh.h[0], mesh.h[1], mesh.h[2]});
  for (int k = 0; k < mesh.n[2]; ++k)
    for (int j = 0; j < mesh.n[1]; ++j)
      for (int i = 0; i < mesh.n[0]; ++i) {
        int64_t id = mesh.lin(i, j, k);
        Vec3 p = mesh.node_pos(i, j, k);
        for (size_t r = 0; r < device.regions.size(); ++r)
          if (device.regions[r].box.contains(p, 1e-9)) {
            mesh.region_of[id] = static_cast<int32_t>(r);
            break;
          }
        if (mesh.region_of[id] < 0)
          fail(ErrorCode::RegionGap, "mesh node not covered by any region");
        for (size_t g = 0; g < device.gates.size(); ++g)
          if (device.gates[g].box.contains(p, 1e-9)) {
            mesh.gate_of[id] = static_cast<int32_t>(g);
            break;
          }
        bool in_channel = true;
        for (int a = 0; a < 3; ++a) {
          if (a == 0 && mesh.periodic_x) continue;
          if (p[a] <= cb.lo[a] + ctol || p[a] >= cb.hi[a] - ctol) {
            in_channel = false;
            break;
          }
        }
        if (in_channel) mesh.channel[id] = 1;
      }

  for (int64_t id = 0; id < nn; ++id)
    if (mesh.channel[id]) {
      mesh.channel_index[id] =
          static_cast<int64_t>(mesh.channel_nodes.size());
      mesh.channel_nodes.push_back(id);
    }
  if (mesh.channel_nodes.empty())
    fail(ErrorCode::SpacingTooCoarse, "channel contains no interior nodes");
  return mesh;
}

}  // namespace kpg
