#include "bitalloc/simcodec.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "bitalloc/error.hpp"
#include "bitalloc/metrics.hpp"

namespace bitalloc {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// mt19937_64 output is fixed by the standard; the normal transform is done
// here because std::normal_distribution differs between implementations.
class PortableNormal {
 public:
  explicit PortableNormal(std::uint64_t seed) : engine_(seed) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  double uniform_open() {
    // 53 random bits mapped into (0, 1).
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace

DistortionModel SyntheticCodecSpec::distortion_model(double omega) const {
  if (!(omega >= 0.0 && omega <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "weighting factor must lie in [0, 1]");
  DistortionModel m;
  m.a = omega * alpha_g + (1.0 - omega) * alpha_gc;
  m.b = (1.0 - omega) * alpha_cc;
  m.c = omega * beta_g + (1.0 - omega) * beta_c;
  m.omega = omega;
  return m;
}

void SyntheticCodecSpec::validate() const {
  if (alpha_g < 0.0 || alpha_gc < 0.0 || alpha_cc < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "codec distortion slopes must be non-negative");
  }
  if (!(rate.gamma_g > 0.0) || !(rate.gamma_c > 0.0) || !(rate.theta_g < 0.0) || !(rate.theta_c < 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "codec rate model needs gamma > 0 and theta < 0");
  }
  if (!(noise_rel >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "noise_rel must be non-negative");
  if (!(overhead_kbpmp >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "overhead_kbpmp must be non-negative");
  if (!(encode_time_ms > 0.0)) throw Error(ErrorCode::kInvalidArgument, "encode_time_ms must be positive");
  if (bit_depth < 1 || bit_depth > 30) throw Error(ErrorCode::kInvalidArgument, "bit_depth must be in [1, 30]");
}

EncodeResult encode(const SyntheticCodecSpec& spec, const QpPair& qp) {
  const QuantPair q = to_steps(qp);
  EncodeResult out;
  out.qp = qp;
  out.d_g = spec.alpha_g * q.q_g + spec.beta_g;
  out.d_c = spec.alpha_gc * q.q_g + spec.alpha_cc * q.q_c + spec.beta_c + spec.coupling * q.q_g * q.q_c;
  const RatePrediction r = predict_rate(spec.rate, q);
  out.r_g = r.r_g;
  out.r_c = r.r_c;
  out.overhead_kbpmp = spec.overhead_kbpmp;
  out.encode_time_ms = spec.encode_time_ms;

  if (spec.noise_rel > 0.0) {
    const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(qp.qp_g)) << 32) |
                              static_cast<std::uint32_t>(qp.qp_c);
    PortableNormal normal(splitmix64(spec.seed ^ splitmix64(key)));
    const double s = spec.noise_rel;
    out.r_g *= std::exp(s * normal());
    out.r_c *= std::exp(s * normal());
    out.d_g = std::max(0.0, out.d_g * (1.0 + s * normal()));
    out.d_c = std::max(0.0, out.d_c * (1.0 + s * normal()));
  }
  return out;
}

std::array<QpPair, 3> probe_schedule() { return {QpPair{33, 25}, QpPair{34, 35}, QpPair{24, 33}}; }

std::vector<QpPair> product_grid(std::span<const int> qp_g_levels, std::span<const int> qp_c_levels) {
  std::vector<QpPair> grid;
  grid.reserve(qp_g_levels.size() * qp_c_levels.size());
  for (int g : qp_g_levels) {
    for (int c : qp_c_levels) grid.push_back({g, c});
  }
  return grid;
}

std::vector<QpPair> full_grid(int min_qp, int max_qp) {
  std::vector<int> levels;
  for (int qp = min_qp; qp <= max_qp; ++qp) levels.push_back(qp);
  return product_grid(levels, levels);
}

SeparabilityReport validate_separability(const SyntheticCodecSpec& spec, std::span<const QpPair> grid) {
  std::map<int, Eigen::Index> g_col, c_col;
  for (const QpPair& qp : grid) {
    g_col.emplace(qp.qp_g, 0);
    c_col.emplace(qp.qp_c, 0);
  }
  if (g_col.size() < 4 || c_col.size() < 4) {
    throw Error(ErrorCode::kDegenerateGrid, "separability check needs at least 4 geometry and 4 color QP levels");
  }
  // Column 0 is the intercept; the first level of each factor is the baseline.
  Eigen::Index next = 1;
  for (auto it = std::next(g_col.begin()); it != g_col.end(); ++it) it->second = next++;
  for (auto it = std::next(c_col.begin()); it != c_col.end(); ++it) it->second = next++;
  g_col.begin()->second = -1;
  c_col.begin()->second = -1;

  const auto n = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, next);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const QpPair& qp = grid[static_cast<std::size_t>(i)];
    x(i, 0) = 1.0;
    if (const Eigen::Index col = g_col[qp.qp_g]; col > 0) x(i, col) = 1.0;
    if (const Eigen::Index col = c_col[qp.qp_c]; col > 0) x(i, col) = 1.0;
    y(i) = encode(spec, qp).d_c;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < next) {
    throw Error(ErrorCode::kDegenerateGrid, "QP levels are not connected; additive fit is not identifiable");
  }
  const Eigen::VectorXd fitted = x * qr.solve(y);
  const double total = (y.array() - y.mean()).square().sum();
  if (!(total > 0.0)) throw Error(ErrorCode::kDegenerateGrid, "color distortion is constant over the grid");
  const double residual = (y - fitted).squaredNorm();

  SeparabilityReport report;
  report.residual_fraction = residual / total;
  const std::vector<double> actual(y.data(), y.data() + n);
  const std::vector<double> model(fitted.data(), fitted.data() + n);
  report.scc = fit_quality(actual, model).scc;
  report.samples = grid.size();
  report.geometry_levels = g_col.size();
  report.color_levels = c_col.size();
  return report;
}

}  // namespace bitalloc
