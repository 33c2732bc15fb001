#include "kpg/geometry.hpp"

#include <algorithm>

namespace kpg {

double Box::min_extent() const {
  return std::min({extent(0), extent(1), extent(2)});
}

bool Box::contains(const Vec3& p, double tol) const {
  for (int a = 0; a < 3; ++a) {
    if (p[a] < lo[a] - tol || p[a] > hi[a] + tol) return false;
  }
  return true;
}

bool Box::strictly_contains(const Vec3& p, double tol) const {
  for (int a = 0; a < 3; ++a) {
    if (p[a] <= lo[a] + tol || p[a] >= hi[a] - tol) return false;
  }
  return true;
}

bool Box::touches(const Box& other, double tol) const {
  for (int a = 0; a < 3; ++a) {
    if (hi[a] < other.lo[a] - tol || other.hi[a] < lo[a] - tol) return false;
  }
  return true;
}

bool Box::interiors_overlap(const Box& a, const Box& b, double tol) {
  for (int ax = 0; ax < 3; ++ax) {
    double lo = std::max(a.lo[ax], b.lo[ax]);
    double hi = std::min(a.hi[ax], b.hi[ax]);
    if (hi - lo <= tol) return false;
  }
  return true;
}

}  // namespace kpg
