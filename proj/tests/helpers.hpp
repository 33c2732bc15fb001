#pragma once

#include <functional>
#include <stdexcept>

#include "kpg/device.hpp"
#include "kpg/errors.hpp"

namespace kpg::test {

inline Box box(double x0, double x1, double y0, double y1, double z0,
               double z1) {
  Box b;
  b.lo = {x0, y0, z0};
  b.hi = {x1, y1, z1};
  return b;
}

// A bare silicon box: single region, no gates, hard walls all around.
inline DeviceSpec bare_box(double lx, double ly, double lz) {
  DeviceSpec spec;
  spec.regions.push_back(
      {"channel", "silicon", box(-lx / 2, lx / 2, -ly / 2, ly / 2, 0.0, lz)});
  spec.channel_region = "channel";
  return spec;
}

inline ErrorCode thrown_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  throw std::runtime_error("expected a kpg::Error to be thrown");
}

}  // namespace kpg::test
