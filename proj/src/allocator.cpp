#include "bitalloc/allocator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "bitalloc/error.hpp"

namespace bitalloc {
namespace {

struct PowerTerms {
  double value;
  double first;   // d/dq
  double second;  // d2/dq2
};

PowerTerms power_terms(double gamma, double theta, double q) {
  const double v = gamma * std::pow(q, theta);
  return {v, theta * v / q, theta * (theta - 1.0) * v / (q * q)};
}

struct Box {
  bool active = false;
  double lo = 0.0;
  double hi = 0.0;
  bool inside(double q) const { return !active || (q > lo && q < hi); }
};

Box box_of(const AllocationProblem& p, const SolverConfig& cfg) {
  if (!cfg.box_barrier) return {};
  return {true, qp_to_step(p.min_qp), qp_to_step(p.max_qp)};
}

bool strictly_feasible(const AllocationProblem& p, const Box& box, const QuantPair& q) {
  if (!(q.q_g > 0.0) || !(q.q_c > 0.0) || !std::isfinite(q.q_g) || !std::isfinite(q.q_c)) return false;
  if (!box.inside(q.q_g) || !box.inside(q.q_c)) return false;
  return predict_rate(p.rm, q).total < p.r_target;
}

double box_value(const Box& box, double q, double mu) {
  return box.active ? -mu * (std::log(q - box.lo) + std::log(box.hi - q)) : 0.0;
}

double barrier_value_only(const AllocationProblem& p, const Box& box, const QuantPair& q, double mu) {
  const double slack = p.r_target - predict_rate(p.rm, q).total;
  return predict_distortion(p.dm, q) - mu * std::log(slack) + box_value(box, q.q_g, mu) +
         box_value(box, q.q_c, mu);
}

// Rate barrier plus the optional step-range terms.
BarrierValue full_barrier(const AllocationProblem& p, const Box& box, const QuantPair& q, double mu) {
  BarrierValue f = barrier_objective(p, q, mu);
  if (!box.active) return f;
  const double v[2] = {q.q_g, q.q_c};
  for (int i = 0; i < 2; ++i) {
    const double l = v[i] - box.lo, u = box.hi - v[i];
    f.value += box_value(box, v[i], mu);
    f.gradient[i] += mu * (1.0 / u - 1.0 / l);
    f.hessian[i][i] += mu * (1.0 / (l * l) + 1.0 / (u * u));
  }
  return f;
}

std::string describe(const QuantPair& q) {
  std::ostringstream s;
  s << "(" << q.q_g << ", " << q.q_c << ")";
  return s.str();
}

// Per-component map between steps and rates, r = gamma * q^theta. In rate
// coordinates the budget is the straight line r_g + r_c = R_T, so Newton steps
// can follow it instead of cutting across a curved contour. The barrier and its
// minimizer are the same in either coordinate system.
struct RateChart {
  double gamma, theta;
  double to_rate(double q) const { return gamma * std::pow(q, theta); }
  double to_step(double r) const { return std::pow(r / gamma, 1.0 / theta); }
  double dq(double q, double r) const { return q / (theta * r); }
  double d2q(double q, double r) const { return (1.0 / theta) * (1.0 / theta - 1.0) * q / (r * r); }
};

// Solves h * d = -g for a 2x2 symmetric h; false if h is not positive definite.
bool newton_direction(const std::array<std::array<double, 2>, 2>& h, const std::array<double, 2>& g,
                      std::array<double, 2>& d) {
  const double det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
  if (!(det > 0.0 && h[0][0] > 0.0)) return false;
  d = {-(h[1][1] * g[0] - h[0][1] * g[1]) / det, -(-h[1][0] * g[0] + h[0][0] * g[1]) / det};
  return true;
}

// Damped Newton centering for one barrier parameter. Returns iterations used.
int center(const AllocationProblem& p, const SolverConfig& cfg, const Box& box, double mu, QuantPair& q) {
  const RateChart chart[2] = {{p.rm.gamma_g, p.rm.theta_g}, {p.rm.gamma_c, p.rm.theta_c}};
  for (int it = 0; it < cfg.max_newton_iters; ++it) {
    const BarrierValue f = full_barrier(p, box, q, mu);
    const double qv[2] = {q.q_g, q.q_c};
    const double r[2] = {chart[0].to_rate(qv[0]), chart[1].to_rate(qv[1])};
    const double j[2] = {chart[0].dq(qv[0], r[0]), chart[1].dq(qv[1], r[1])};

    std::array<double, 2> g{f.gradient[0] * j[0], f.gradient[1] * j[1]};
    std::array<std::array<double, 2>, 2> h{};
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) h[a][b] = j[a] * f.hessian[a][b] * j[b];
      h[a][a] += f.gradient[a] * chart[a].d2q(qv[a], r[a]);
    }
    std::array<double, 2> d{};
    if (!newton_direction(h, g, d)) {
      // Not convex here in rate coordinates: take the step-domain Newton
      // direction, or steepest descent, expressed as a rate-domain direction.
      std::array<double, 2> dq{};
      if (!newton_direction(f.hessian, f.gradient, dq)) dq = {-f.gradient[0], -f.gradient[1]};
      d = {dq[0] / j[0], dq[1] / j[1]};
    }
    const double slope = g[0] * d[0] + g[1] * d[1];  // -lambda^2
    if (-slope / 2.0 <= cfg.newton_tol) return it;

    auto at = [&](double t) -> QuantPair {
      const double rg = r[0] + t * d[0], rc = r[1] + t * d[1];
      if (!(rg > 0.0) || !(rc > 0.0)) return {-1.0, -1.0};
      return {chart[0].to_step(rg), chart[1].to_step(rc)};
    };
    double t = 1.0;
    while (!strictly_feasible(p, box, at(t))) {
      t *= cfg.backtrack_factor;
      if (t < 1e-300) {
        throw Error(ErrorCode::kNewtonNonConvergence, "line search cannot stay feasible at " + describe(q));
      }
    }
    bool accepted = false;
    while (t > 1e-20) {
      const QuantPair next = at(t);
      if (barrier_value_only(p, box, next, mu) <= f.value + cfg.sufficient_decrease * t * slope) {
        q = next;
        accepted = true;
        break;
      }
      t *= cfg.backtrack_factor;
    }
    if (!accepted) {
      // No representable decrease left; the iterate is as centered as
      // floating point allows.
      return it + 1;
    }
  }
  std::ostringstream msg;
  msg << "Newton's method did not converge within " << cfg.max_newton_iters << " iterations at mu = " << mu
      << ", q = " << describe(q);
  throw Error(ErrorCode::kNewtonNonConvergence, msg.str());
}

std::size_t nearest_index(const std::vector<double>& steps, double q) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < steps.size(); ++i) {
    // <= sends ties to the larger step.
    if (std::abs(steps[i] - q) <= std::abs(steps[best] - q)) best = i;
  }
  return best;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(mu0 > 0.0)) throw Error(ErrorCode::kInvalidArgument, "mu0 must be positive");
  if (!(eta > 0.0 && eta < 1.0)) throw Error(ErrorCode::kInvalidArgument, "eta must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::kInvalidArgument, "epsilon must be positive");
  if (!(newton_tol > 0.0)) throw Error(ErrorCode::kInvalidArgument, "newton_tol must be positive");
  if (max_newton_iters < 1) throw Error(ErrorCode::kInvalidArgument, "max_newton_iters must be at least 1");
  if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "backtrack_factor must lie in (0, 1)");
  }
  if (!(sufficient_decrease > 0.0 && sufficient_decrease < 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, "sufficient_decrease must lie in (0, 0.5)");
  }
}

std::vector<double> AllocationProblem::grid_steps() const {
  std::vector<double> steps;
  for (int qp = min_qp; qp <= max_qp; ++qp) steps.push_back(qp_to_step(qp));
  return steps;
}

void AllocationProblem::validate() const {
  if (!dm.well_behaved()) {
    std::ostringstream msg;
    msg << "distortion model has negative slope (a = " << dm.a << ", b = " << dm.b << ")";
    throw Error(ErrorCode::kInvalidModel, msg.str());
  }
  if (!(rm.gamma_g > 0.0) || !(rm.gamma_c > 0.0) || !(rm.theta_g < 0.0) || !(rm.theta_c < 0.0)) {
    throw Error(ErrorCode::kInvalidModel, "rate model needs gamma > 0 and theta < 0 for both components");
  }
  if (!(r_target > 0.0) || !std::isfinite(r_target)) {
    throw Error(ErrorCode::kInvalidArgument, "target rate must be positive");
  }
  if (min_qp < 0 || max_qp < min_qp) throw Error(ErrorCode::kInvalidArgument, "bad QP grid bounds");
}

BarrierValue barrier_objective(const AllocationProblem& p, const QuantPair& q, double mu) {
  if (!(q.q_g > 0.0) || !(q.q_c > 0.0)) {
    throw Error(ErrorCode::kDomainError, "quantization steps must be positive, got " + describe(q));
  }
  const PowerTerms rg = power_terms(p.rm.gamma_g, p.rm.theta_g, q.q_g);
  const PowerTerms rc = power_terms(p.rm.gamma_c, p.rm.theta_c, q.q_c);
  const double slack = p.r_target - (rg.value + rc.value);
  if (!(slack > 0.0)) {
    throw Error(ErrorCode::kDomainError, "barrier undefined: rate budget exceeded at " + describe(q));
  }

  BarrierValue f;
  f.slack = slack;
  f.value = predict_distortion(p.dm, q) - mu * std::log(slack);
  f.gradient = {p.dm.a + mu * rg.first / slack, p.dm.b + mu * rc.first / slack};
  const double s2 = slack * slack;
  f.hessian[0][0] = mu * (rg.second / slack + rg.first * rg.first / s2);
  f.hessian[1][1] = mu * (rc.second / slack + rc.first * rc.first / s2);
  f.hessian[0][1] = f.hessian[1][0] = mu * rg.first * rc.first / s2;
  return f;
}

Allocation solve_interior_point(const AllocationProblem& problem, const SolverConfig& config) {
  problem.validate();
  config.validate();
  const Box box = box_of(problem, config);
  if (!box.inside(config.start.q_g) || !box.inside(config.start.q_c)) {
    std::ostringstream msg;
    msg << "start point " << describe(config.start) << " lies outside the step range (" << box.lo << ", "
        << box.hi << ")";
    throw Error(ErrorCode::kInfeasibleStart, msg.str());
  }
  if (!strictly_feasible(problem, box, config.start)) {
    std::ostringstream msg;
    msg << "start point " << describe(config.start) << " needs " << predict_rate(problem.rm, config.start).total
        << " kbpmp, budget is " << problem.r_target;
    throw Error(ErrorCode::kInfeasibleStart, msg.str());
  }

  Allocation out;
  QuantPair q = config.start;
  for (double mu = config.mu0; mu >= config.epsilon; mu *= config.eta) {
    out.newton_iterations += center(problem, config, box, mu, q);
    ++out.outer_iterations;
  }

  out.continuous = q;
  out.continuous_rate = predict_rate(problem.rm, q).total;
  out.continuous_distortion = predict_distortion(problem.dm, q);

  const Rounding r = round_to_grid(problem, q);
  out.qp = r.qp;
  out.rounding_violation = r.violation;
  const QuantPair rounded = to_steps(r.qp);
  out.predicted_rate = predict_rate(problem.rm, rounded).total;
  out.predicted_distortion = predict_distortion(problem.dm, rounded);
  return out;
}

Rounding round_to_grid(const AllocationProblem& problem, const QuantPair& continuous) {
  const std::vector<double> steps = problem.grid_steps();
  const double lo = steps.front(), hi = steps.back();
  std::size_t ig = nearest_index(steps, std::clamp(continuous.q_g, lo, hi));
  std::size_t ic = nearest_index(steps, std::clamp(continuous.q_c, lo, hi));
  const std::size_t last = steps.size() - 1;

  auto rate_at = [&] { return predict_rate(problem.rm, {steps[ig], steps[ic]}).total; };
  double rate = rate_at();
  while (rate > problem.r_target && (ig < last || ic < last)) {
    const PowerTerms rg = power_terms(problem.rm.gamma_g, problem.rm.theta_g, steps[ig]);
    const PowerTerms rc = power_terms(problem.rm.gamma_c, problem.rm.theta_c, steps[ic]);
    const double cost_g = problem.dm.a / std::abs(rg.first);
    const double cost_c = problem.dm.b / std::abs(rc.first);
    const bool coarsen_g = ic == last || (ig < last && cost_g <= cost_c);
    if (coarsen_g) {
      ++ig;
    } else {
      ++ic;
    }
    rate = rate_at();
  }

  Rounding out;
  out.qp = {problem.min_qp + static_cast<int>(ig), problem.min_qp + static_cast<int>(ic)};
  out.violation = std::max(0.0, rate - problem.r_target);
  return out;
}

ExhaustiveResult exhaustive_search(const GridOracle& oracle, double r_target, int min_qp, int max_qp) {
  if (min_qp < 0 || max_qp < min_qp) throw Error(ErrorCode::kInvalidArgument, "bad QP grid bounds");
  ExhaustiveResult best;
  bool found = false;
  for (int g = min_qp; g <= max_qp; ++g) {
    for (int c = min_qp; c <= max_qp; ++c) {
      const QpPair qp{g, c};
      const GridObservation obs = oracle(qp);
      ++best.evaluations;
      if (!(obs.rate <= r_target)) continue;
      // Scan order already yields lower qp_g, then lower qp_c, on exact ties.
      const bool better = !found || obs.distortion < best.observation.distortion ||
                          (obs.distortion == best.observation.distortion && obs.rate < best.observation.rate);
      if (better) {
        best.qp = qp;
        best.observation = obs;
        found = true;
      }
    }
  }
  if (!found) {
    std::ostringstream msg;
    msg << "no QP pair in [" << min_qp << ", " << max_qp << "]^2 fits the budget " << r_target << " kbpmp";
    throw Error(ErrorCode::kInfeasibleBudget, msg.str());
  }
  return best;
}

}  // namespace bitalloc
