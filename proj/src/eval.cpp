#include "bitalloc/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "bitalloc/error.hpp"

namespace bitalloc {
namespace {

void check_curve(std::span<const RdPoint> curve, const char* name) {
  if (curve.size() < 4) {
    throw Error(ErrorCode::kInvalidArgument, std::string("BD-PSNR ") + name + " needs at least 4 points");
  }
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (!(curve[i].rate > 0.0) || !std::isfinite(curve[i].rate)) {
      throw Error(ErrorCode::kInvalidArgument, std::string("BD-PSNR ") + name + " has a non-positive rate");
    }
    if (!std::isfinite(curve[i].psnr)) {
      throw Error(ErrorCode::kInvalidArgument, std::string("BD-PSNR ") + name + " has a non-finite PSNR");
    }
    if (i > 0 && curve[i].rate < curve[i - 1].rate) {
      throw Error(ErrorCode::kInvalidArgument, std::string("BD-PSNR ") + name + " is not sorted by rate");
    }
  }
}

// Antiderivative of the cubic at x.
double integral(const std::array<double, 4>& p, double x) {
  return x * (p[0] + x * (p[1] / 2.0 + x * (p[2] / 3.0 + x * p[3] / 4.0)));
}

}  // namespace

double compute_be(double actual_kbpmp, double target_kbpmp) {
  if (!(target_kbpmp > 0.0)) throw Error(ErrorCode::kInvalidArgument, "target bitrate must be positive");
  return std::abs(actual_kbpmp - target_kbpmp) / target_kbpmp * 100.0;
}

int compute_qpe(const QpPair& pba, const QpPair& esa) {
  return std::abs(pba.qp_g - esa.qp_g) + std::abs(pba.qp_c - esa.qp_c);
}

double compute_cq(double t_pba, double t_esa) {
  if (!(t_esa > 0.0)) throw Error(ErrorCode::kInvalidArgument, "exhaustive-search time must be positive");
  if (t_pba < 0.0) throw Error(ErrorCode::kInvalidArgument, "model-based time must be non-negative");
  return t_pba / t_esa * 100.0;
}

std::array<double, 4> fit_log_rate_cubic(std::span<const RdPoint> curve) {
  const auto n = static_cast<Eigen::Index>(curve.size());
  Eigen::MatrixXd v(n, 4);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = std::log10(curve[static_cast<std::size_t>(i)].rate);
    v.row(i) << 1.0, x, x * x, x * x * x;
    y(i) = curve[static_cast<std::size_t>(i)].psnr;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(v);
  if (qr.rank() < 4) throw Error(ErrorCode::kInvalidArgument, "BD-PSNR curve needs 4 distinct rates");
  const Eigen::Vector4d p = qr.solve(y);
  return {p(0), p(1), p(2), p(3)};
}

double bd_psnr(std::span<const RdPoint> curve_a, std::span<const RdPoint> curve_b) {
  check_curve(curve_a, "curve A");
  check_curve(curve_b, "curve B");
  const double lo = std::max(std::log10(curve_a.front().rate), std::log10(curve_b.front().rate));
  const double hi = std::min(std::log10(curve_a.back().rate), std::log10(curve_b.back().rate));
  if (!(hi > lo)) throw Error(ErrorCode::kNonOverlappingRates, "BD-PSNR curves share no rate interval");

  const auto pa = fit_log_rate_cubic(curve_a);
  const auto pb = fit_log_rate_cubic(curve_b);
  const double area_a = integral(pa, hi) - integral(pa, lo);
  const double area_b = integral(pb, hi) - integral(pb, lo);
  return (area_b - area_a) / (hi - lo);
}

}  // namespace bitalloc
