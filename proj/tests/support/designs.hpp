#pragma once

#include <algorithm>

#include "pemnet/dataset.hpp"
#include "pemnet/rng.hpp"

namespace pemnet::testsupport {

/// Uniform draw inside the bounding box of the default factorial levels.
inline physics::CellDesign random_box_design(SplitMix64& rng, physics::DeviceMode mode = physics::DeviceMode::FuelCell) {
  const auto spec = dataset::FactorialSpec::default_levels();
  std::array<double, physics::kDesignVariables> v{};
  for (std::size_t k = 0; k < v.size(); ++k) {
    const auto [lo, hi] = std::minmax_element(spec.levels[k].begin(), spec.levels[k].end());
    v[k] = rng.uniform(*lo, *hi);
  }
  auto d = physics::CellDesign::from_values(v, mode);
  if (mode == physics::DeviceMode::HydrogenPump) d.s_o2 = 0.0;
  return d;
}

}  // namespace pemnet::testsupport
