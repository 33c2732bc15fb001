#include "kpg/materials.hpp"

#include "kpg/errors.hpp"

namespace kpg {

void MaterialParams::validate() const {
  if (!(gamma1 > 0.0))
    fail(ErrorCode::InvalidConfig, "material '" + name + "': gamma1 must be > 0");
  if (delta_so < 0.0)
    fail(ErrorCode::InvalidConfig, "material '" + name + "': delta_so must be >= 0");
  if (permittivity < 1.0)
    fail(ErrorCode::InvalidConfig,
         "material '" + name + "': permittivity must be >= 1");
}

MaterialParams silicon() {
  MaterialParams m;
  m.name = "silicon";
  m.gamma1 = 4.285;
  m.gamma2 = 0.339;
  m.gamma3 = 1.446;
  m.kappa = -0.42;
  m.delta_so = 44.0;
  m.permittivity = 11.7;
  m.c11 = 166.0;
  m.c12 = 64.0;
  m.b_v = -2.1;
  m.d_v = -4.8;
  m.semiconductor = true;
  return m;
}

MaterialParams sio2() {
  MaterialParams m;
  m.name = "sio2";
  m.permittivity = 3.9;
  return m;
}

MaterialParams hfo2() {
  MaterialParams m;
  m.name = "hfo2";
  m.permittivity = 20.0;
  return m;
}

MaterialParams si3n4() {
  MaterialParams m;
  m.name = "si3n4";
  m.permittivity = 7.5;
  return m;
}

bool has_material_preset(const std::string& name) {
  return name == "silicon" || name == "sio2" || name == "hfo2" ||
         name == "si3n4";
}

MaterialParams material_preset(const std::string& name) {
  if (name == "silicon") return silicon();
  if (name == "sio2") return sio2();
  if (name == "hfo2") return hfo2();
  if (name == "si3n4") return si3n4();
  fail(ErrorCode::UnknownMaterial, "no material preset named '" + name + "'");
}

}  // namespace kpg
