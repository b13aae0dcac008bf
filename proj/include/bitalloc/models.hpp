#pragma once

#include <span>
#include <string>
#include <vector>

namespace bitalloc {

inline constexpr int kMinGridQp = 22;
inline constexpr int kMaxGridQp = 42;

struct QuantPair {
  double q_g = 0.0;
  double q_c = 0.0;
};

struct QpPair {
  int qp_g = 0;
  int qp_c = 0;

  friend bool operator==(const QpPair&, const QpPair&) = default;
};

bool in_grid(const QpPair& qp) noexcept;

// HEVC mapping 2^((qp - 4) / 6): QP 22 -> 8, QP 42 -> ~80.6.
double qp_to_step(int qp);
QuantPair to_steps(const QpPair& qp);

// One pre-encoding: rates in kbpmp, d the combined distortion at the fit's omega.
struct ProbePoint {
  QpPair qp;
  double r_g = 0.0;
  double r_c = 0.0;
  double d = 0.0;
};

// Row of a probe log; keeps the two distortion components so that one log
// serves any weighting factor.
struct ProbeRecord {
  QpPair qp;
  double r_g = 0.0;
  double r_c = 0.0;
  double d_g = 0.0;
  double d_c = 0.0;

  ProbePoint at_omega(double omega) const;
};

// D = a*q_g + b*q_c + c.
struct DistortionModel {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double omega = 0.5;
  // Non-empty when the fit produced a < 0 or b < 0.
  std::vector<std::string> warnings;

  bool well_behaved() const noexcept { return a >= 0.0 && b >= 0.0; }
};

// R_g = gamma_g * q_g^theta_g, R_c = gamma_c * q_c^theta_c.
struct RateModel {
  double gamma_g = 0.0;
  double theta_g = 0.0;
  double gamma_c = 0.0;
  double theta_c = 0.0;
};

struct RatePrediction {
  double r_g = 0.0;
  double r_c = 0.0;
  double total = 0.0;
};

// Exact two-point power-law solve per component. Symmetric in (p1, p2).
RateModel fit_rate_model(const ProbePoint& p1, const ProbePoint& p2);

// Uses, per component, the two probes whose steps are furthest apart
// (earliest indices on ties). Needs at least two probes.
RateModel fit_rate_model(std::span<const ProbePoint> probes);

// Log-log least squares over every probe.
RateModel fit_rate_model_least_squares(std::span<const ProbePoint> probes);

// Exact 3x3 solve in the step domain with partial pivoting.
DistortionModel fit_distortion_model(const ProbePoint& p1, const ProbePoint& p2, const ProbePoint& p3,
                                     double omega);

// Overdetermined fit for more than three probes.
DistortionModel fit_distortion_model_least_squares(std::span<const ProbePoint> probes, double omega);

double predict_distortion(const DistortionModel& model, const QuantPair& q);
RatePrediction predict_rate(const RateModel& model, const QuantPair& q);

// Rate of `points` points coded with `bits` bits, in kilobits per million points.
double kbpmp_from_bits(double bits, double points);

}  // namespace bitalloc
