#include "bohm/velocity_field.hpp"

#include <cmath>

namespace bohm {

VelocitySample interpolate_velocity(const VelocityField& field,
                                    std::span<const double> point) {
  const Grid& grid = field.grid;
  const std::size_t r = grid.rank();
  std::array<std::size_t, Grid::kMaxRank> lo{}, hi{};
  std::array<double, Grid::kMaxRank> frac{};
  for (std::size_t a = 0; a < r; ++a) {
    const Axis& ax = grid.axis(a);
    const double s = (grid.wrap(a, point[a]) - ax.lower) / ax.spacing();
    double fl = std::floor(s);
    auto i0 = static_cast<std::size_t>(fl);
    if (i0 >= ax.points) {
      i0 = ax.points - 1;
      fl = static_cast<double>(i0);
    }
    lo[a] = i0;
    hi[a] = (i0 + 1) % ax.points;
    frac[a] = s - fl;
  }

  VelocitySample out;
  bool touches_node = false;
  const std::size_t corners = std::size_t{1} << r;
  for (std::size_t c = 0; c < corners; ++c) {
    double w = 1.0;
    std::size_t flat = 0;
    for (std::size_t a = 0; a < r; ++a) {
      const bool upper = (c >> a) & 1u;
      w *= upper ? frac[a] : 1.0 - frac[a];
      flat += (upper ? hi[a] : lo[a]) * grid.stride(a);
    }
    touches_node |= field.node_mask[flat] != 0;
    for (std::size_t a = 0; a < r; ++a) out.v[a] += w * field.components[a][flat];
  }

  if (touches_node) {
    out.capped = true;
    double speed2 = 0.0;
    for (std::size_t a = 0; a < r; ++a) speed2 += out.v[a] * out.v[a];
    const double speed = std::sqrt(speed2);
    if (speed > field.speed_cap) {
      const double scale = field.speed_cap / speed;
      for (std::size_t a = 0; a < r; ++a) out.v[a] *= scale;
    }
  }
  return out;
}

}  // namespace bohm
