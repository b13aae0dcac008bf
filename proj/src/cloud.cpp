#include "bitalloc/cloud.hpp"

#include <algorithm>
#include <bit>

#include "bitalloc/error.hpp"

namespace bitalloc {

LumaWeights luma_weights(LumaMatrix matrix) noexcept {
  switch (matrix) {
    case LumaMatrix::kBt601:
      return {299, 587, 114, 1000};
    case LumaMatrix::kBt709:
    default:
      return {2126, 7152, 722, 10000};
  }
}

std::int64_t scaled_luminance(Rgb color, const LumaWeights& w) noexcept {
  return w.r * color.r + w.g * color.g + w.b * color.b;
}

double luminance(Rgb color, LumaMatrix matrix) noexcept {
  const LumaWeights w = luma_weights(matrix);
  return static_cast<double>(scaled_luminance(color, w)) / static_cast<double>(w.denominator);
}

int minimal_bit_depth(const std::vector<Point3>& positions) noexcept {
  std::uint32_t max_coord = 0;
  for (const Point3& p : positions) {
    for (int axis = 0; axis < 3; ++axis) {
      max_coord = std::max(max_coord, static_cast<std::uint32_t>(std::max(p[axis], 0)));
    }
  }
  return std::max(1, static_cast<int>(std::bit_width(max_coord)));
}

PointCloud::PointCloud(std::vector<Point3> positions, std::vector<Rgb> colors, int bit_depth)
    : positions_(std::move(positions)), colors_(std::move(colors)), bit_depth_(bit_depth) {
  if (positions_.empty()) {
    throw Error(ErrorCode::kInvalidCloud, "point cloud must contain at least one point");
  }
  if (positions_.size() != colors_.size()) {
    throw Error(ErrorCode::kInvalidCloud,
                "point cloud has " + std::to_string(positions_.size()) + " positions but " +
                    std::to_string(colors_.size()) + " colors");
  }
  if (bit_depth_ < 0 || bit_depth_ > 30) {
    throw Error(ErrorCode::kInvalidCloud, "bit depth must be in [1, 30]");
  }
  if (bit_depth_ == 0) bit_depth_ = minimal_bit_depth(positions_);

  const std::int64_t limit = std::int64_t{1} << bit_depth_;
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    for (int axis = 0; axis < 3; ++axis) {
      const std::int64_t v = positions_[i][axis];
      if (v < 0 || v >= limit) {
        throw Error(ErrorCode::kCoordinateOutOfRange,
                    "point " + std::to_string(i) + " coordinate " + std::to_string(v) +
                        " outside [0, 2^" + std::to_string(bit_depth_) + ")");
      }
    }
  }
}

}  // namespace bitalloc
