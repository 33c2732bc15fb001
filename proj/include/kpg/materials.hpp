#pragma once

#include <string>

namespace kpg {

// Bulk material parameters. Dielectrics only use `permittivity`; the band
// and elastic parameters matter for the semiconductor channel.
struct MaterialParams {
  std::string name;
  double gamma1 = 1.0;  // Luttinger parameters (dimensionless)
  double gamma2 = 0.0;
  double gamma3 = 0.0;
  double kappa = 0.0;      // magnetic Luttinger parameter
  double delta_so = 0.0;   // spin-orbit splitting, meV
  double permittivity = 1.0;
  double c11 = 0.0, c12 = 0.0;  // elastic constants, GPa
  double b_v = 0.0, d_v = 0.0;  // Bir-Pikus deformation potentials, eV
  bool semiconductor = false;

  // Throws on gamma1 <= 0, delta_so < 0 or permittivity < 1.
  void validate() const;
};

MaterialParams silicon();
MaterialParams sio2();
MaterialParams hfo2();
MaterialParams si3n4();

// Look up one of the built-in presets by name; throws UnknownMaterial.
MaterialParams material_preset(const std::string& name);
bool has_material_preset(const std::string& name);

}  // namespace kpg
