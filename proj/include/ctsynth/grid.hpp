#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctsynth/error.hpp"

namespace ctsynth {

struct Dims {
  int64_t x = 0;
  int64_t y = 0;
  int64_t z = 0;

  int64_t count() const { return x * y * z; }
  int64_t operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  int64_t& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
  bool operator==(const Dims&) const = default;

  static Dims cube(int64_t d) { return {d, d, d}; }
};

std::string to_string(const Dims& d);

using Spacing = std::array<double, 3>;
using Index3 = std::array<int64_t, 3>;

/// Dense 3D grid, x-fastest. Volume and MaskVolume are the two instantiations
/// the engine works with; patches are cubic volumes.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(Dims dims, Spacing spacing, T fill = T{}) : dims_(dims), spacing_(spacing) {
    if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0) {
      fail(Errc::invalid_argument, "grid dims must be positive, got " + to_string(dims));
    }
    for (double s : spacing) {
      if (!(s > 0.0)) fail(Errc::invalid_argument, "grid spacing must be positive");
    }
    data_.assign(static_cast<size_t>(dims.count()), fill);
  }
  Grid(Dims dims, Spacing spacing, std::vector<T> data) : Grid(dims, spacing) {
    if (data.size() != data_.size()) {
      fail(Errc::invalid_argument, "voxel count does not match dims " + to_string(dims));
    }
    data_ = std::move(data);
  }

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  int64_t index(int64_t x, int64_t y, int64_t z) const { return x + dims_.x * (y + dims_.y * z); }
  Index3 coords(int64_t linear) const {
    const int64_t x = linear % dims_.x;
    const int64_t rest = linear / dims_.x;
    return {x, rest % dims_.y, rest / dims_.y};
  }
  bool contains(int64_t x, int64_t y, int64_t z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims_.x && y < dims_.y && z < dims_.z;
  }

  T& operator()(int64_t x, int64_t y, int64_t z) { return data_[static_cast<size_t>(index(x, y, z))]; }
  const T& operator()(int64_t x, int64_t y, int64_t z) const {
    return data_[static_cast<size_t>(index(x, y, z))];
  }
  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  std::span<T> voxels() { return data_; }
  std::span<const T> voxels() const { return data_; }
  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  Dims dims_{};
  Spacing spacing_{1.0, 1.0, 1.0};
  std::vector<T> data_;
};

using Volume = Grid<float>;
using MaskVolume = Grid<uint8_t>;

inline constexpr float kAirHu = -1024.0f;

/// Throws invariant_violation when a voxel is outside {0,1}.
void require_binary(const MaskVolume& mask);
/// Throws invariant_violation on NaN/Inf.
void require_finite(const Volume& volume);

int64_t count_foreground(const MaskVolume& mask);

template <typename A, typename B>
void require_same_dims(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (a.dims() != b.dims()) {
    fail(Errc::invalid_argument,
         std::string(what) + ": dims mismatch " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  }
}

}  // namespace ctsynth
