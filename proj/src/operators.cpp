#include "cardiostrain/operators.hpp"

namespace cardiostrain {

Mat3 gradient_tensor(const DisplacementField4D& field, int t, const Index3& voxel) {
  if (field.components() != 3) throw DimensionError("gradient needs a 3-component field");
  const Grid3& g = field.grid();
  Mat3 J = Mat3::Zero();
  for (int axis = 0; axis < 3; ++axis) {
    const int n = g.dims[axis];
    if (n < 2) continue;
    Index3 lo = voxel, hi = voxel;
    double span;
    if (voxel[axis] == 0) {
      hi[axis] += 1;
      span = g.spacing[axis];
    } else if (voxel[axis] == n - 1) {
      lo[axis] -= 1;
      span = g.spacing[axis];
    } else {
      lo[axis] -= 1;
      hi[axis] += 1;
      span = 2.0 * g.spacing[axis];
    }
    J.col(axis) = (field.vec(t, g.index(hi)) - field.vec(t, g.index(lo))) / span;
  }
  return J;
}

double divergence_penalty(const DisplacementField4D& field, const VoxelMask* mask) {
  const Grid3& g = field.grid();
  if (mask && !mask->grid.same_shape(g)) throw DimensionError("mask grid differs from field grid");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    if (mask && !mask->at(v)) continue;
    const Index3 ijk = g.unravel(v);
    for (int t = 0; t < field.frames(); ++t) {
      const double tr = gradient_tensor(field, t, ijk).trace();
      sum += tr * tr;
      ++count;
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

LoopMode parse_loop_mode(const std::string& s) {
  if (s == "literal") return LoopMode::Literal;
  if (s == "closure") return LoopMode::Closure;
  throw ConfigError("unknown loop mode: " + s);
}

const char* to_string(LoopMode mode) {
  return mode == LoopMode::Literal ? "literal" : "closure";
}

double loop_penalty(const DisplacementField4D& field, LoopMode mode, const VoxelMask* mask) {
  if (field.frames() < 2) throw DimensionError("loop penalty needs at least two frames");
  const Grid3& g = field.grid();
  if (mask && !mask->grid.same_shape(g)) throw DimensionError("mask grid differs from field grid");
  const int T = field.frames();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    if (mask && !mask->at(v)) continue;
    ++count;
    if (mode == LoopMode::Literal) {
      for (int t = 0; t + 1 < T; ++t) sum += (field.vec(t + 1, v) - field.vec(t, v)).squaredNorm();
    } else {
      // The increments telescope; evaluating the endpoints keeps a closed loop exactly zero.
      sum += (field.vec(T - 1, v) - field.vec(0, v)).squaredNorm();
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace cardiostrain
