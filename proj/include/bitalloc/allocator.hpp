#pragma once

#include <array>
#include <functional>
#include <vector>

#include "bitalloc/models.hpp"

namespace bitalloc {

// All solver tolerances live here. Defaults reproduce the published
// settings: mu0 = 0.1, eta = 1e-6, epsilon = 1e-10, start (80, 80).
struct SolverConfig {
  double mu0 = 0.1;
  double eta = 1e-6;
  double epsilon = 1e-10;
  QuantPair start{80.0, 80.0};
  // Inner loop stops when half the squared Newton decrement
  // (g' H^-1 g / 2, the gradient norm in the inverse-Hessian metric) drops
  // below this value.
  double newton_tol = 1e-9;
  int max_newton_iters = 100;
  double backtrack_factor = 0.5;
  double sufficient_decrease = 1e-4;
  // Keep the continuous iterate inside the grid's step range with
  // -mu * ln(q - q_min) - mu * ln(q_max - q) terms per component.
  bool box_barrier = true;

  void validate() const;
};

// minimize a*q_g + b*q_c + c  s.t.  gamma_g q_g^theta_g + gamma_c q_c^theta_c <= r_target
struct AllocationProblem {
  DistortionModel dm;
  RateModel rm;
  double r_target = 0.0;  // kbpmp, geometry + color only
  int min_qp = kMinGridQp;
  int max_qp = kMaxGridQp;

  // Admissible steps, ascending.
  std::vector<double> grid_steps() const;
  // Throws kInvalidModel / kInvalidArgument.
  void validate() const;
};

struct BarrierValue {
  double value = 0.0;
  double slack = 0.0;
  std::array<double, 2> gradient{};
  std::array<std::array<double, 2>, 2> hessian{};
};

// Linear distortion minus mu * ln(r_target - R(q)), with closed-form
// derivatives. Throws kDomainError outside the strictly feasible region.
BarrierValue barrier_objective(const AllocationProblem& problem, const QuantPair& q, double mu);

struct Allocation {
  QuantPair continuous;
  double continuous_rate = 0.0;
  double continuous_distortion = 0.0;
  QpPair qp;
  double predicted_rate = 0.0;        // at the rounded pair
  double predicted_distortion = 0.0;  // at the rounded pair
  double rounding_violation = 0.0;    // kbpmp over budget after rounding, 0 if feasible
  int outer_iterations = 0;
  int newton_iterations = 0;
};

Allocation solve_interior_point(const AllocationProblem& problem, const SolverConfig& config = {});

struct Rounding {
  QpPair qp;
  double violation = 0.0;
};

// Nearest grid step per component (ties to the larger step); while over
// budget, coarsen the component that costs less distortion per unit of rate
// saved.
Rounding round_to_grid(const AllocationProblem& problem, const QuantPair& continuous);

struct GridObservation {
  double rate = 0.0;
  double distortion = 0.0;
};

using GridOracle = std::function<GridObservation(const QpPair&)>;

struct ExhaustiveResult {
  QpPair qp;
  GridObservation observation;
  int evaluations = 0;
};

// Scans every QP pair in [min_qp, max_qp]^2. Among pairs with rate <=
// r_target picks the lowest distortion, then lower rate, lower qp_g, lower qp_c.
ExhaustiveResult exhaustive_search(const GridOracle& oracle, double r_target, int min_qp = kMinGridQp,
                                   int max_qp = kMaxGridQp);

}  // namespace bitalloc
