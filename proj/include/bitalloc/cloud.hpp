#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bitalloc {

struct Point3 {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;

  std::int32_t operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  friend bool operator==(const Point3&, const Point3&) = default;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// RGB -> Y conversion matrix. Weights are held as integers over a common
// denominator so luma differences can be accumulated exactly.
enum class LumaMatrix { kBt709, kBt601 };

struct LumaWeights {
  std::int64_t r;
  std::int64_t g;
  std::int64_t b;
  std::int64_t denominator;
};

LumaWeights luma_weights(LumaMatrix matrix) noexcept;

// Y in [0, 255], not rounded.
double luminance(Rgb color, LumaMatrix matrix = LumaMatrix::kBt709) noexcept;

// Y scaled by the matrix denominator; exact.
std::int64_t scaled_luminance(Rgb color, const LumaWeights& weights) noexcept;

// Voxelized cloud: integer positions with one color each. Immutable once built.
class PointCloud {
 public:
  // Throws Error(kInvalidCloud) on empty input or size mismatch and
  // Error(kCoordinateOutOfRange) when a coordinate falls outside
  // [0, 2^bit_depth). bit_depth == 0 selects the smallest depth that holds
  // every coordinate.
  PointCloud(std::vector<Point3> positions, std::vector<Rgb> colors, int bit_depth = 0);

  std::size_t size() const noexcept { return positions_.size(); }
  const std::vector<Point3>& positions() const noexcept { return positions_; }
  const std::vector<Rgb>& colors() const noexcept { return colors_; }
  int bit_depth() const noexcept { return bit_depth_; }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::vector<Point3> positions_;
  std::vector<Rgb> colors_;
  int bit_depth_ = 0;
};

int minimal_bit_depth(const std::vector<Point3>& positions) noexcept;

enum class PlyFormat { kAscii, kBinaryLittleEndian };

// Reads `element vertex` with x,y,z and red,green,blue. Float coordinates are
// rounded to nearest (ties to even). A `comment bit_depth N` header line sets
// the grid depth. Skipped properties are reported through `warnings`.
PointCloud load_ply(const std::filesystem::path& path,
                    std::vector<std::string>* warnings = nullptr);

// Writes int32 coordinates, uint8 colors and the bit_depth comment.
void save_ply(const std::filesystem::path& path, const PointCloud& cloud,
              PlyFormat format = PlyFormat::kBinaryLittleEndian);

}  // namespace bitalloc
