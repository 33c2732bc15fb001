#pragma once

#include <map>
#include <string>
#include <vector>

#include "kpg/device.hpp"
#include "kpg/mesh.hpp"

namespace kpg {

// Electrostatic potential sampled on mesh nodes (volts). Electrode nodes
// carry their Dirichlet value exactly.
struct PotentialField {
  std::vector<double> values;  // per node
  std::map<std::string, double> gate_voltages;
};

// Dimensionless response D1 to +1 V on one gate, with E1 = -grad D1 (V/nm).
struct UnitResponse {
  std::string gate;
  std::vector<double> d1;            // per node
  std::vector<double> e1x, e1y, e1z; // per node
};

enum class Parity { Even, Odd, None };

struct MirrorPlane {
  int axis = 0;        // normal axis: 0=x (sigma_yz), 1=y (sigma_xz), 2=z (sigma_xy)
  double position = 0; // plane coordinate, must sit on a mesh plane
};

// Solves div(eps grad V) = 0 with Dirichlet electrodes and zero normal flux
// on open simulation-box faces. Gates absent from `gate_voltages` are held
// at 0 V. Face permittivities use the harmonic mean of the node values.
PotentialField solve_poisson(const DeviceModel& device, const Mesh& mesh,
                             const std::map<std::string, double>& gate_voltages);

UnitResponse unit_response(const DeviceModel& device, const Mesh& mesh,
                           const std::string& gate);

// Classifies the parity of E1 under the mirror over nodes of `window`
// by the norm ratio ||E1(sigma r) -+ sigma E1(r)|| / ||E1||.
Parity field_parity(const Mesh& mesh, const UnitResponse& e1,
                    const MirrorPlane& mirror, const Box& window, double tol);

// Largest finite-volume flux imbalance over interior control volumes,
// relative to the local flux scale (diagnostic; ~1e-13 for a converged solve).
double max_flux_residual(const DeviceModel& device, const Mesh& mesh,
                         const PotentialField& field);

const char* parity_name(Parity p);

}  // namespace kpg
