#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace bohm {

/// One periodic axis: `points` nodes at lower + i*spacing, i = 0..points-1.
/// The node at `upper` is identified with the node at `lower`.
struct Axis {
  std::size_t points = 0;
  double lower = 0.0;
  double upper = 0.0;

  double length() const { return upper - lower; }
  double spacing() const { return length() / static_cast<double>(points); }
  double coordinate(std::size_t i) const {
    return lower + static_cast<double>(i) * spacing();
  }
  /// Angular wavenumber of FFT bin j. With `zero_nyquist` the unpaired
  /// Nyquist bin is mapped to 0 (used for odd operators such as d/dx).
  double wavenumber(std::size_t j, bool zero_nyquist) const;

  bool operator==(const Axis&) const = default;
};

/// Uniform rectangular periodic grid, row-major with axis 0 slowest.
class Grid {
 public:
  static constexpr std::size_t kMaxRank = 4;
  static constexpr std::size_t kMaxPoints = std::size_t{1} << 24;
  static constexpr std::size_t kMinAxisPoints = 8;

  Grid() = default;
  explicit Grid(std::vector<Axis> axes);

  std::size_t rank() const { return axes_.size(); }
  const Axis& axis(std::size_t a) const { return axes_.at(a); }
  std::span<const Axis> axes() const { return axes_; }
  std::size_t total_points() const { return total_; }
  std::size_t stride(std::size_t a) const { return strides_[a]; }
  double cell_volume() const { return cell_volume_; }
  /// Euclidean diagonal of the domain box.
  double diameter() const;

  /// Multi-index of a flat cell index.
  std::array<std::size_t, kMaxRank> unravel(std::size_t flat) const;
  std::size_t index_along(std::size_t flat, std::size_t a) const {
    return (flat / strides_[a]) % axes_[a].points;
  }
  double coordinate(std::size_t flat, std::size_t a) const {
    return axes_[a].coordinate(index_along(flat, a));
  }

  /// Maps x into [lower, upper) on axis a.
  double wrap(std::size_t a, double x) const;
  /// Index of the node whose cell [x_i - dx/2, x_i + dx/2) contains x.
  std::size_t cell_of(std::size_t a, double x) const;

  bool operator==(const Grid& other) const { return axes_ == other.axes_; }

 private:
  std::vector<Axis> axes_;
  std::array<std::size_t, kMaxRank> strides_{};
  std::size_t total_ = 0;
  double cell_volume_ = 0.0;
};

enum class Role { kSystem, kPointer, kRest };

struct AxisRole {
  std::size_t axis = 0;
  Role role = Role::kSystem;
  std::size_t particle = 0;
  double mass = 1.0;
};

/// Per-axis masses from a role list; every axis must be covered exactly once.
std::vector<double> masses_from_roles(const Grid& grid,
                                      std::span<const AxisRole> roles);

/// Roles with every axis a separate system particle of the given mass.
std::vector<AxisRole> uniform_roles(const Grid& grid, double mass);

void require_same_grid(const Grid& a, const Grid& b);

}  // namespace bohm
