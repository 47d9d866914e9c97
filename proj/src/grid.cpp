#include "bohm/grid.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "bohm/errors.hpp"

namespace bohm {

double Axis::wavenumber(std::size_t j, bool zero_nyquist) const {
  const auto n = static_cast<long long>(points);
  long long m = static_cast<long long>(j);
  if (2 * m == n && zero_nyquist) return 0.0;
  if (2 * m >= n) m -= n;
  return 2.0 * std::numbers::pi * static_cast<double>(m) / length();
}

Grid::Grid(std::vector<Axis> axes) : axes_(std::move(axes)) {
  if (axes_.empty() || axes_.size() > kMaxRank) {
    throw InvalidArgument("grid rank must be between 1 and 4, got " +
                          std::to_string(axes_.size()));
  }
  std::size_t total = 1;
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    const Axis& ax = axes_[a];
    const std::size_t n = ax.points;
    if (n < kMinAxisPoints || (n & (n - 1)) != 0) {
      throw InvalidArgument("axis " + std::to_string(a) +
                            ": point count must be a power of two >= 8, got " +
                            std::to_string(n));
    }
    if (!(ax.upper > ax.lower) || !std::isfinite(ax.lower) ||
        !std::isfinite(ax.upper)) {
      throw InvalidArgument("axis " + std::to_string(a) +
                            ": upper bound must exceed lower bound");
    }
    if (total > kMaxPoints / n) {
      throw GridCapExceeded("grid exceeds 2^24 points");
    }
    total *= n;
  }
  total_ = total;
  std::size_t stride = 1;
  cell_volume_ = 1.0;
  for (std::size_t a = axes_.size(); a-- > 0;) {
    strides_[a] = stride;
    stride *= axes_[a].points;
    cell_volume_ *= axes_[a].spacing();
  }
}

double Grid::diameter() const {
  double s = 0.0;
  for (const Axis& ax : axes_) s += ax.length() * ax.length();
  return std::sqrt(s);
}

std::array<std::size_t, Grid::kMaxRank> Grid::unravel(std::size_t flat) const {
  std::array<std::size_t, kMaxRank> idx{};
  for (std::size_t a = 0; a < axes_.size(); ++a) idx[a] = index_along(flat, a);
  return idx;
}

double Grid::wrap(std::size_t a, double x) const {
  const Axis& ax = axes_[a];
  const double len = ax.length();
  double y = std::fmod(x - ax.lower, len);
  if (y < 0.0) y += len;
  if (y >= len) y -= len;
  return ax.lower + y;
}

std::size_t Grid::cell_of(std::size_t a, double x) const {
  const Axis& ax = axes_[a];
  const double f = (wrap(a, x) - ax.lower) / ax.spacing() + 0.5;
  auto i = static_cast<std::size_t>(std::floor(f));
  return i % ax.points;
}

std::vector<double> masses_from_roles(const Grid& grid,
                                      std::span<const AxisRole> roles) {
  std::vector<double> masses(grid.rank(), 0.0);
  std::vector<bool> seen(grid.rank(), false);
  for (const AxisRole& r : roles) {
    if (r.axis >= grid.rank()) {
      throw InvalidArgument("axis role refers to axis " +
                            std::to_string(r.axis) + " outside the grid");
    }
    if (seen[r.axis]) {
      throw InvalidArgument("axis " + std::to_string(r.axis) +
                            " has more than one role");
    }
    if (!(r.mass > 0.0)) {
      throw InvalidArgument("axis " + std::to_string(r.axis) +
                            ": mass must be positive");
    }
    seen[r.axis] = true;
    masses[r.axis] = r.mass;
  }
  for (std::size_t a = 0; a < grid.rank(); ++a) {
    if (!seen[a]) {
      throw InvalidArgument("axis " + std::to_string(a) + " has no role");
    }
  }
  return masses;
}

std::vector<AxisRole> uniform_roles(const Grid& grid, double mass) {
  std::vector<AxisRole> roles;
  for (std::size_t a = 0; a < grid.rank(); ++a) {
    roles.push_back({a, Role::kSystem, a, mass});
  }
  return roles;
}

void require_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) throw GridMismatch("operands live on different grids");
}

}  // namespace bohm
