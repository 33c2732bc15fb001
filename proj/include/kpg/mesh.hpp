#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "kpg/device.hpp"

namespace kpg {

// Rectilinear vertex-centered mesh shared by the Poisson and k.p solvers.
// Nodes sit on planes origin[a] + i*h[a]; region boundaries coincide with
// planes by construction. Along a periodic x axis the rightmost plane is
// identified with the leftmost and not stored.
struct Mesh {
  std::array<double, 3> origin{};
  std::array<double, 3> h{};  // nm
  std::array<int, 3> n{};     // node counts
  bool periodic_x = false;

  std::vector<int32_t> region_of;  // node -> region index (total map)
  std::vector<int32_t> gate_of;    // node -> gate index or -1
  std::vector<uint8_t> channel;    // node -> 1 if quantum (hard-wall interior)

  // Dense ordinal numbering of channel nodes, lexicographic in (k,j,i).
  std::vector<int64_t> channel_index;  // node -> ordinal or -1
  std::vector<int64_t> channel_nodes;  // ordinal -> node linear index

  int64_t num_nodes() const {
    return static_cast<int64_t>(n[0]) * n[1] * n[2];
  }
  int64_t num_channel_nodes() const {
    return static_cast<int64_t>(channel_nodes.size());
  }
  int64_t lin(int i, int j, int k) const {
    return (static_cast<int64_t>(k) * n[1] + j) * n[0] + i;
  }
  void unlin(int64_t idx, int& i, int& j, int& k) const {
    i = static_cast<int>(idx % n[0]);
    j = static_cast<int>((idx / n[0]) % n[1]);
    k = static_cast<int>(idx / (static_cast<int64_t>(n[0]) * n[1]));
  }
  double coord(int axis, int i) const { return origin[axis] + i * h[axis]; }
  Vec3 node_pos(int i, int j, int k) const {
    return {coord(0, i), coord(1, j), coord(2, k)};
  }

  // Neighbor node in direction d in {-1,0,+1}^3, honoring periodic x.
  // Returns -1 when the step leaves the grid.
  int64_t neighbor(int i, int j, int k, int dx, int dy, int dz) const;

  // Neighbor restricted to the channel (hard wall): -1 outside.
  int64_t channel_neighbor(int i, int j, int k, int dx, int dy, int dz) const;

  uint64_t content_hash() const;
};

// Builds the mesh for a validated device. Every region/gate boundary lands on
// a mesh plane and each axis spacing stays within 25% of `target_spacing`.
Mesh build_mesh(const DeviceModel& device, double target_spacing);

}  // namespace kpg
