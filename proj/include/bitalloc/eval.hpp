#pragma once

#include <array>
#include <span>

#include "bitalloc/models.hpp"

namespace bitalloc {

// |actual - target| / target * 100.
double compute_be(double actual_kbpmp, double target_kbpmp);

// |dQP_g| + |dQP_c| between the model-based and exhaustive choices.
int compute_qpe(const QpPair& pba, const QpPair& esa);

// t_pba / t_esa * 100.
double compute_cq(double t_pba, double t_esa);

struct RdPoint {
  double rate = 0.0;  // kbpmp
  double psnr = 0.0;  // dB
};

// Cubic least-squares fit of PSNR against log10(rate); coefficients in
// ascending powers.
std::array<double, 4> fit_log_rate_cubic(std::span<const RdPoint> curve);

// Bjontegaard delta PSNR of curve_b relative to curve_a over the shared
// log-rate interval (positive when b is better).
double bd_psnr(std::span<const RdPoint> curve_a, std::span<const RdPoint> curve_b);

}  // namespace bitalloc
