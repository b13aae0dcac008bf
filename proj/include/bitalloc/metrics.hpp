#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bitalloc/cloud.hpp"

namespace bitalloc {

// Balanced kd-tree over one cloud's integer positions. Queries return the
// point minimizing squared distance, ties resolved to the smallest index.
// Read-only after construction and safe for concurrent queries.
class NnIndex {
 public:
  explicit NnIndex(const PointCloud& cloud);
  explicit NnIndex(std::vector<Point3> positions);

  struct Hit {
    std::size_t index;
    std::int64_t squared_distance;
  };

  Hit nearest(const Point3& query) const;
  std::size_t size() const noexcept { return points_.size(); }

 private:
  struct Node {
    // Leaf when axis < 0; then [begin, end) indexes order_.
    int axis = -1;
    std::int32_t split = 0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::uint32_t node, const Point3& q, Hit& best) const;

  std::vector<Point3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

struct DistortionPair {
  double d_g = 0.0;  // squared voxel units
  double d_c = 0.0;  // squared 8-bit luma units
};

// Mean squared distance from every point of `b` to its nearest neighbor in `a`.
double geometry_error(const PointCloud& b, const PointCloud& a);

struct MetricOptions {
  LumaMatrix luma = LumaMatrix::kBt709;
  // 0 picks hardware concurrency; 1 forces a sequential loop. Results are
  // identical either way because sums are integral.
  unsigned threads = 0;
};

// Directed errors of `b` against `a`; the color term reuses the geometry NN.
DistortionPair directed_distortion(const PointCloud& b, const PointCloud& a, const NnIndex& index_of_a,
                                   const MetricOptions& options = {});

// max over both directions, per component.
DistortionPair symmetric_distortion(const PointCloud& a, const PointCloud& b, const MetricOptions& options = {});

double combined_distortion(const DistortionPair& pair, double omega);

// Both MSEs are normalized by their squared peak before weighting. Returns
// +infinity when the weighted normalized MSE is zero.
double psnr(double d_g, double d_c, double omega, double geometry_peak, double color_peak);

double geometry_peak_for(int bit_depth);

struct FitQuality {
  double scc = 0.0;
  double rmse = 0.0;
  std::optional<double> nrmse;  // absent when max(actual) <= 0
};

FitQuality fit_quality(std::span<const double> actual, std::span<const double> fitted);

}  // namespace bitalloc
