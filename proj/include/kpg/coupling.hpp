#pragma once

#include <optional>

namespace kpg {

// Magnetic/strain coupling switches for operator assembly. Defaults: all on,
// no gamma3 override. gamma3_override replaces gamma3 inside the k.p kinetic
// terms (used to probe the R/S-driven Rabi mechanism, not the masses alone).
struct CouplingFlags {
  bool peierls_on = true;
  bool bloch_zeeman_on = true;
  bool strain_on = true;
  std::optional<double> gamma3_override;
};

}  // namespace kpg
