#pragma once

#include <Eigen/Dense>

namespace kpg {

using Vec3 = Eigen::Vector3d;

// Axis-aligned box, lo <= hi per axis. Zero thickness along an axis is legal
// (electrode plates); material regions additionally require positive volume.
struct Box {
  Vec3 lo{0.0, 0.0, 0.0};
  Vec3 hi{0.0, 0.0, 0.0};

  double extent(int axis) const { return hi[axis] - lo[axis]; }
  double min_extent() const;
  double volume() const {
    return extent(0) * extent(1) * extent(2);
  }
  Vec3 center() const { return 0.5 * (lo + hi); }

  bool well_formed() const {
    return extent(0) >= 0.0 && extent(1) >= 0.0 && extent(2) >= 0.0;
  }
  bool contains(const Vec3& p, double tol = 1e-9) const;
  bool strictly_contains(const Vec3& p, double tol = 1e-9) const;
  // Closed-set intersection test ("touch or overlap").
  bool touches(const Box& other, double tol = 1e-9) const;
  // Do the open interiors intersect?
  static bool interiors_overlap(const Box& a, const Box& b, double tol = 1e-9);
};

}  // namespace kpg
