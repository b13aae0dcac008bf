#include "bitalloc/models.hpp"

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <sstream>
#include <utility>

#include "bitalloc/error.hpp"

namespace bitalloc {
namespace {

void require_positive_rates(const ProbePoint& p) {
  if (!(p.r_g > 0.0) || !(p.r_c > 0.0)) {
    std::ostringstream msg;
    msg << "probe at QP (" << p.qp.qp_g << "," << p.qp.qp_c << ") has non-positive rate (" << p.r_g << ", "
        << p.r_c << ")";
    throw Error(ErrorCode::kNonPositiveRate, msg.str());
  }
}

void require_omega(double omega) {
  if (!(omega >= 0.0 && omega <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "weighting factor must lie in [0, 1]");
}

struct PowerLaw {
  double gamma;
  double theta;
};

PowerLaw solve_power_law(double q1, double r1, double q2, double r2, const char* component) {
  const double lq1 = std::log(q1), lq2 = std::log(q2);
  if (lq1 == lq2) {
    throw Error(ErrorCode::kDegenerateProbes,
                std::string("probes share the same ") + component + " step; power law is undetermined");
  }
  const double lr1 = std::log(r1), lr2 = std::log(r2);
  const double theta = (lr1 - lr2) / (lq1 - lq2);
  if (!(theta < 0.0)) {
    throw Error(ErrorCode::kNonMonotoneRate,
                std::string(component) + " rate does not decrease with the step (theta = " + std::to_string(theta) + ")");
  }
  // Averaging both equations keeps the result independent of probe order.
  const double log_gamma = 0.5 * ((lr1 - theta * lq1) + (lr2 - theta * lq2));
  return {std::exp(log_gamma), theta};
}

void attach_sanity_warnings(DistortionModel& m) {
  if (m.a < 0.0) m.warnings.push_back("fitted geometry slope a = " + std::to_string(m.a) + " is negative");
  if (m.b < 0.0) m.warnings.push_back("fitted color slope b = " + std::to_string(m.b) + " is negative");
}

}  // namespace

bool in_grid(const QpPair& qp) noexcept {
  return qp.qp_g >= kMinGridQp && qp.qp_g <= kMaxGridQp && qp.qp_c >= kMinGridQp && qp.qp_c <= kMaxGridQp;
}

double qp_to_step(int qp) {
  if (qp < 0) throw Error(ErrorCode::kInvalidArgument, "QP must be non-negative");
  return std::exp2((qp - 4) / 6.0);
}

QuantPair to_steps(const QpPair& qp) { return {qp_to_step(qp.qp_g), qp_to_step(qp.qp_c)}; }

ProbePoint ProbeRecord::at_omega(double omega) const {
  require_omega(omega);
  return {qp, r_g, r_c, omega * d_g + (1.0 - omega) * d_c};
}

RateModel fit_rate_model(const ProbePoint& p1, const ProbePoint& p2) {
  require_positive_rates(p1);
  require_positive_rates(p2);
  const QuantPair q1 = to_steps(p1.qp), q2 = to_steps(p2.qp);
  const PowerLaw g = solve_power_law(q1.q_g, p1.r_g, q2.q_g, p2.r_g, "geometry");
  const PowerLaw c = solve_power_law(q1.q_c, p1.r_c, q2.q_c, p2.r_c, "color");
  return {g.gamma, g.theta, c.gamma, c.theta};
}

RateModel fit_rate_model(std::span<const ProbePoint> probes) {
  if (probes.size() < 2) throw Error(ErrorCode::kDegenerateProbes, "rate fit needs at least two probes");
  for (const ProbePoint& p : probes) require_positive_rates(p);

  auto widest = [&](auto qp_of) {
    std::pair<std::size_t, std::size_t> best{0, 1};
    int best_gap = -1;
    for (std::size_t i = 0; i < probes.size(); ++i) {
      for (std::size_t j = i + 1; j < probes.size(); ++j) {
        const int gap = std::abs(qp_of(probes[i]) - qp_of(probes[j]));
        if (gap > best_gap) {
          best_gap = gap;
          best = {i, j};
        }
      }
    }
    return best;
  };
  const auto [gi, gj] = widest([](const ProbePoint& p) { return p.qp.qp_g; });
  const auto [ci, cj] = widest([](const ProbePoint& p) { return p.qp.qp_c; });

  const PowerLaw g = solve_power_law(qp_to_step(probes[gi].qp.qp_g), probes[gi].r_g,
                                     qp_to_step(probes[gj].qp.qp_g), probes[gj].r_g, "geometry");
  const PowerLaw c = solve_power_law(qp_to_step(probes[ci].qp.qp_c), probes[ci].r_c,
                                     qp_to_step(probes[cj].qp.qp_c), probes[cj].r_c, "color");
  return {g.gamma, g.theta, c.gamma, c.theta};
}

RateModel fit_rate_model_least_squares(std::span<const ProbePoint> probes) {
  if (probes.size() < 2) throw Error(ErrorCode::kDegenerateProbes, "rate fit needs at least two probes");
  const auto n = static_cast<Eigen::Index>(probes.size());
  Eigen::MatrixXd xg(n, 2), xc(n, 2);
  Eigen::VectorXd yg(n), yc(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ProbePoint& p = probes[static_cast<std::size_t>(i)];
    require_positive_rates(p);
    const QuantPair q = to_steps(p.qp);
    xg(i, 0) = 1.0;
    xg(i, 1) = std::log(q.q_g);
    xc(i, 0) = 1.0;
    xc(i, 1) = std::log(q.q_c);
    yg(i) = std::log(p.r_g);
    yc(i) = std::log(p.r_c);
  }
  auto solve = [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const char* component) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < 2) {
      throw Error(ErrorCode::kDegenerateProbes, std::string("all probes share one ") + component + " step");
    }
    const Eigen::Vector2d beta = qr.solve(y);
    if (!(beta(1) < 0.0)) {
      throw Error(ErrorCode::kNonMonotoneRate, std::string(component) + " rate does not decrease with the step");
    }
    return PowerLaw{std::exp(beta(0)), beta(1)};
  };
  const PowerLaw g = solve(xg, yg, "geometry");
  const PowerLaw c = solve(xc, yc, "color");
  return {g.gamma, g.theta, c.gamma, c.theta};
}

DistortionModel fit_distortion_model(const ProbePoint& p1, const ProbePoint& p2, const ProbePoint& p3,
                                     double omega) {
  require_omega(omega);
  std::array<std::array<double, 4>, 3> m{};
  const ProbePoint* probes[3] = {&p1, &p2, &p3};
  for (int i = 0; i < 3; ++i) {
    const QuantPair q = to_steps(probes[i]->qp);
    m[i] = {q.q_g, q.q_c, 1.0, probes[i]->d};
  }

  // Gaussian elimination with partial pivoting on the augmented matrix.
  double scale = 0.0;
  for (const auto& row : m) scale = std::max({scale, std::abs(row[0]), std::abs(row[1]), 1.0});
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    }
    if (std::abs(m[pivot][col]) <= 1e-12 * scale) {
      throw Error(ErrorCode::kCollinearProbes, "probe steps are collinear; distortion system is singular");
    }
    std::swap(m[col], m[pivot]);
    for (int r = col + 1; r < 3; ++r) {
      const double f = m[r][col] / m[col][col];
      for (int k = col; k < 4; ++k) m[r][k] -= f * m[col][k];
    }
  }
  double x[3];
  for (int r = 2; r >= 0; --r) {
    double s = m[r][3];
    for (int k = r + 1; k < 3; ++k) s -= m[r][k] * x[k];
    x[r] = s / m[r][r];
  }

  DistortionModel model{x[0], x[1], x[2], omega, {}};
  attach_sanity_warnings(model);
  return model;
}

DistortionModel fit_distortion_model_least_squares(std::span<const ProbePoint> probes, double omega) {
  require_omega(omega);
  if (probes.size() < 3) throw Error(ErrorCode::kCollinearProbes, "distortion fit needs at least three probes");
  const auto n = static_cast<Eigen::Index>(probes.size());
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ProbePoint& p = probes[static_cast<std::size_t>(i)];
    const QuantPair q = to_steps(p.qp);
    x.row(i) << q.q_g, q.q_c, 1.0;
    y(i) = p.d;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < 3) throw Error(ErrorCode::kCollinearProbes, "probe steps are collinear; distortion system is singular");
  const Eigen::Vector3d beta = qr.solve(y);
  DistortionModel model{beta(0), beta(1), beta(2), omega, {}};
  attach_sanity_warnings(model);
  return model;
}

double predict_distortion(const DistortionModel& model, const QuantPair& q) {
  return model.a * q.q_g + model.b * q.q_c + model.c;
}

RatePrediction predict_rate(const RateModel& model, const QuantPair& q) {
  RatePrediction r;
  r.r_g = model.gamma_g * std::pow(q.q_g, model.theta_g);
  r.r_c = model.gamma_c * std::pow(q.q_c, model.theta_c);
  r.total = r.r_g + r.r_c;
  return r;
}

double kbpmp_from_bits(double bits, double points) {
  if (!(points > 0.0)) throw Error(ErrorCode::kInvalidArgument, "point count must be positive");
  return (bits / 1000.0) / (points / 1e6);
}

}  // namespace bitalloc
