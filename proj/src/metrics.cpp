#include "bitalloc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "bitalloc/error.hpp"

namespace bitalloc {
namespace {

constexpr std::uint32_t kLeafSize = 8;

std::int64_t squared_distance(const Point3& p, const Point3& q) {
  const std::int64_t dx = std::int64_t{p.x} - q.x;
  const std::int64_t dy = std::int64_t{p.y} - q.y;
  const std::int64_t dz = std::int64_t{p.z} - q.z;
  return dx * dx + dy * dy + dz * dz;
}

__extension__ typedef unsigned __int128 Wide;

double wide_to_double(Wide v) {
  const auto hi = static_cast<std::uint64_t>(v >> 64);
  const auto lo = static_cast<std::uint64_t>(v);
  return static_cast<double>(hi) * 18446744073709551616.0 + static_cast<double>(lo);
}

// Quotient of two exact integers; correctly rounded while both fit a double mantissa.
double wide_ratio(Wide num, Wide den) {
  constexpr Wide kExact = Wide{1} << 53;
  if (num < kExact && den < kExact) return static_cast<double>(num) / static_cast<double>(den);
  const Wide q = num / den;
  const Wide r = num % den;
  return wide_to_double(q) + wide_to_double(r) / wide_to_double(den);
}

}  // namespace

NnIndex::NnIndex(const PointCloud& cloud) : NnIndex(cloud.positions()) {}

NnIndex::NnIndex(std::vector<Point3> positions) : points_(std::move(positions)) {
  if (points_.empty()) throw Error(ErrorCode::kInvalidCloud, "cannot index an empty cloud");
  if (points_.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kInvalidCloud, "cloud too large to index");
  }
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  build(0, static_cast<std::uint32_t>(order_.size()));
}

std::uint32_t NnIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({});
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }

  std::int32_t lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::numeric_limits<std::int32_t>::max();
    hi[a] = std::numeric_limits<std::int32_t>::min();
  }
  for (std::uint32_t i = begin; i < end; ++i) {
    const Point3& p = points_[order_[i]];
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (std::int64_t{hi[a]} - lo[a] > std::int64_t{hi[axis]} - lo[axis]) axis = a;
  }
  if (hi[axis] == lo[axis]) {
    // All points coincide; a leaf of any size is fine.
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t l, std::uint32_t r) {
                     const std::int32_t cl = points_[l][axis];
                     const std::int32_t cr = points_[r][axis];
                     return cl < cr || (cl == cr && l < r);
                   });
  const std::int32_t split = points_[order_[mid]][axis];
  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

void NnIndex::search(std::uint32_t id, const Point3& q, Hit& best) const {
  const Node& node = nodes_[id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      const std::int64_t d = squared_distance(points_[idx], q);
      if (d < best.squared_distance || (d == best.squared_distance && idx < best.index)) {
        best = {idx, d};
      }
    }
    return;
  }
  // Left subtree holds coordinates <= split, right subtree >= split.
  const std::int64_t diff = std::int64_t{q[node.axis]} - node.split;
  const std::uint32_t near = diff < 0 ? node.left : node.right;
  const std::uint32_t far = diff < 0 ? node.right : node.left;
  search(near, q, best);
  // Equal distance must still be visited: the far side may hold a smaller index.
  if (diff * diff <= best.squared_distance) search(far, q, best);
}

NnIndex::Hit NnIndex::nearest(const Point3& query) const {
  Hit best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<std::int64_t>::max()};
  search(0, query, best);
  return best;
}

DistortionPair directed_distortion(const PointCloud& b, const PointCloud& a, const NnIndex& index_of_a,
                                   const MetricOptions& options) {
  const LumaWeights w = luma_weights(options.luma);
  const auto& bp = b.positions();
  const auto& bc = b.colors();
  const auto& ac = a.colors();
  const std::size_t n = b.size();

  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, n / 4096)));

  struct Partial {
    Wide geometry = 0;
    Wide color = 0;
  };
  std::vector<Partial> partials(threads);
  auto work = [&](unsigned t) {
    const std::size_t begin = n * t / threads;
    const std::size_t end = n * (t + 1) / threads;
    Partial acc;
    for (std::size_t i = begin; i < end; ++i) {
      const NnIndex::Hit hit = index_of_a.nearest(bp[i]);
      acc.geometry += static_cast<Wide>(hit.squared_distance);
      const std::int64_t dy = scaled_luminance(bc[i], w) - scaled_luminance(ac[hit.index], w);
      acc.color += static_cast<Wide>(dy * dy);
    }
    partials[t] = acc;
  };

  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
  }

  Partial total;
  for (const Partial& p : partials) {
    total.geometry += p.geometry;
    total.color += p.color;
  }
  const Wide count = n;
  const Wide color_den = count * static_cast<Wide>(w.denominator) * static_cast<Wide>(w.denominator);
  return {wide_ratio(total.geometry, count), wide_ratio(total.color, color_den)};
}

double geometry_error(const PointCloud& b, const PointCloud& a) {
  const NnIndex index(a);
  return directed_distortion(b, a, index).d_g;
}

DistortionPair symmetric_distortion(const PointCloud& a, const PointCloud& b, const MetricOptions& options) {
  const NnIndex index_a(a);
  const NnIndex index_b(b);
  const DistortionPair ba = directed_distortion(b, a, index_a, options);
  const DistortionPair ab = directed_distortion(a, b, index_b, options);
  return {std::max(ba.d_g, ab.d_g), std::max(ba.d_c, ab.d_c)};
}

double combined_distortion(const DistortionPair& pair, double omega) {
  if (!(omega >= 0.0 && omega <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "weighting factor must lie in [0, 1]");
  }
  return omega * pair.d_g + (1.0 - omega) * pair.d_c;
}

double geometry_peak_for(int bit_depth) {
  if (bit_depth < 1 || bit_depth > 30) throw Error(ErrorCode::kInvalidArgument, "bit depth must be in [1, 30]");
  return std::ldexp(1.0, bit_depth) - 1.0;
}

double psnr(double d_g, double d_c, double omega, double geometry_peak, double color_peak) {
  if (!(geometry_peak > 0.0) || !(color_peak > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "PSNR peaks must be positive");
  }
  if (!(omega >= 0.0 && omega <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "weighting factor must lie in [0, 1]");
  }
  if (d_g < 0.0 || d_c < 0.0) throw Error(ErrorCode::kInvalidArgument, "MSE must be non-negative");
  const double nmse_g = d_g / (geometry_peak * geometry_peak);
  const double nmse_c = d_c / (color_peak * color_peak);
  const double nmse = omega * nmse_g + (1.0 - omega) * nmse_c;
  if (nmse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / nmse);
}

FitQuality fit_quality(std::span<const double> actual, std::span<const double> fitted) {
  if (actual.size() != fitted.size() || actual.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "fit quality needs two equal-length sequences of at least 2 values");
  }
  const auto n = static_cast<double>(actual.size());
  const double mean_a = std::accumulate(actual.begin(), actual.end(), 0.0) / n;
  const double mean_f = std::accumulate(fitted.begin(), fitted.end(), 0.0) / n;
  double saa = 0.0, sff = 0.0, saf = 0.0, sse = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double da = actual[i] - mean_a;
    const double df = fitted[i] - mean_f;
    saa += da * da;
    sff += df * df;
    saf += da * df;
    const double e = actual[i] - fitted[i];
    sse += e * e;
  }
  if (saa == 0.0) throw Error(ErrorCode::kUndefinedScc, "actual sequence is constant; SCC undefined");

  FitQuality q;
  q.scc = sff == 0.0 ? 0.0 : std::clamp(saf * saf / (saa * sff), 0.0, 1.0);
  q.rmse = std::sqrt(sse / n);
  const double max_actual = *std::max_element(actual.begin(), actual.end());
  if (max_actual > 0.0) q.nrmse = q.rmse / max_actual;
  return q;
}

}  // namespace bitalloc
