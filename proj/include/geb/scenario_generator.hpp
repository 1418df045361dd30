#pragma once

#include <cstdint>

#include "geb/scenario_io.hpp"

namespace geb {

// Knobs of the synthetic 13-node day. Defaults produce the shipped scenario.
struct GeneratorOptions {
  std::uint64_t seed = 2021;
  double impedance_per_kft = 0.0;  // pu resistance per 1000 ft; 0 picks the default
  double x_over_r = 2.0;
  double baseline_scale = 1.0;
};

/// IEEE 13-node topology with one matched-room building per downstream node,
/// 8 PVs, one EV and one ESS each. EV demands are drawn here, once.
ScenarioConfig generate_ieee13(const GeneratorOptions& options = {});

}  // namespace geb
