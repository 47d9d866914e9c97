#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "bohm/grid.hpp"

namespace bohm {

/// Bohmian guidance velocities sampled on a grid, one component per axis.
struct VelocityField {
  Grid grid;
  std::vector<std::vector<double>> components;
  /// 1 where the density is below the node threshold.
  std::vector<std::uint8_t> node_mask;
  double time = 0.0;
  /// Speed limit applied when an interpolation stencil touches a node.
  double speed_cap = std::numeric_limits<double>::infinity();
};

struct VelocitySample {
  std::array<double, Grid::kMaxRank> v{};
  bool capped = false;
};

/// Periodic multilinear interpolation over the 2^rank surrounding nodes.
/// If any stencil node is masked the result's speed is limited to
/// field.speed_cap and `capped` is set.
VelocitySample interpolate_velocity(const VelocityField& field,
                                    std::span<const double> point);

}  // namespace bohm
