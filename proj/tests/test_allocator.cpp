#include <algorithm>
#include <cmath>
#include <random>

#include "bitalloc/allocator.hpp"
#include "bitalloc/error.hpp"
#include "bitalloc/simcodec.hpp"
#include "doctest.h"

using namespace bitalloc;

namespace {

AllocationProblem worked_problem(double r_target = 1000.0) {
  AllocationProblem p;
  p.dm = {0.5, 0.25, 4.0, 0.5, {}};
  p.rm = {6400.0, -1.0, 3200.0, -1.0};
  p.r_target = r_target;
  return p;
}

// Random problem whose budget lies strictly between the coarsest and finest grid rates.
AllocationProblem random_problem(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AllocationProblem p;
  p.dm = {0.01 + 0.3 * u(rng), 0.05 + 0.6 * u(rng), 1 + 5 * u(rng), 0.5, {}};
  const double tg = -0.6 - 0.9 * u(rng), tc = -0.8 - 1.0 * u(rng);
  p.rm = {(100 + 500 * u(rng)) / std::pow(8.0, tg), tg, (100 + 700 * u(rng)) / std::pow(8.0, tc), tc};
  const double lo = predict_rate(p.rm, {80.64, 80.64}).total * 1.05;
  const double hi = predict_rate(p.rm, {8, 8}).total;
  p.r_target = lo + (hi - lo) * u(rng);
  return p;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::kIo;
}

}  // namespace

TEST_CASE("barrier value reduces to the linear part at unit slack") {
  AllocationProblem p = worked_problem();
  const QuantPair q{20.0, 25.0};
  p.r_target = predict_rate(p.rm, q).total + 1.0;
  const BarrierValue f = barrier_objective(p, q, 0.37);
  CHECK(f.slack == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.value == doctest::Approx(predict_distortion(p.dm, q)).epsilon(1e-12));
}

TEST_CASE("barrier derivatives match central differences") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  while (checked < 100) {
    const AllocationProblem p = random_problem(rng);
    const QuantPair q{8 + 72 * u(rng), 8 + 72 * u(rng)};
    if (!(predict_rate(p.rm, q).total < p.r_target)) continue;
    const double mu = std::pow(10.0, -3.0 * u(rng));
    const BarrierValue f = barrier_objective(p, q, mu);
    const double hg = 1e-5 * q.q_g, hc = 1e-5 * q.q_c;
    auto fv = [&](double g, double c) { return barrier_objective(p, {g, c}, mu).value; };
    auto gr = [&](double g, double c) { return barrier_objective(p, {g, c}, mu).gradient; };
    const double fd_g = (fv(q.q_g + hg, q.q_c) - fv(q.q_g - hg, q.q_c)) / (2 * hg);
    const double fd_c = (fv(q.q_g, q.q_c + hc) - fv(q.q_g, q.q_c - hc)) / (2 * hc);
    CHECK(f.gradient[0] == doctest::Approx(fd_g).epsilon(1e-6));
    CHECK(f.gradient[1] == doctest::Approx(fd_c).epsilon(1e-6));
    const auto gp = gr(q.q_g + hg, q.q_c), gm = gr(q.q_g - hg, q.q_c);
    const auto cp = gr(q.q_g, q.q_c + hc), cm = gr(q.q_g, q.q_c - hc);
    const double scale = std::abs(f.hessian[0][0]) + std::abs(f.hessian[1][1]);
    CHECK(std::abs(f.hessian[0][0] - (gp[0] - gm[0]) / (2 * hg)) <= 1e-6 * scale);
    CHECK(std::abs(f.hessian[1][0] - (gp[1] - gm[1]) / (2 * hg)) <= 1e-6 * scale);
    CHECK(std::abs(f.hessian[0][1] - (cp[0] - cm[0]) / (2 * hc)) <= 1e-6 * scale);
    CHECK(std::abs(f.hessian[1][1] - (cp[1] - cm[1]) / (2 * hc)) <= 1e-6 * scale);
    // Symmetric positive definite.
    CHECK(f.hessian[0][1] == f.hessian[1][0]);
    CHECK(f.hessian[0][0] > 0.0);
    CHECK(f.hessian[0][0] * f.hessian[1][1] - f.hessian[0][1] * f.hessian[1][0] > 0.0);
    ++checked;
  }
}

TEST_CASE("barrier is undefined outside the feasible set") {
  const AllocationProblem p = worked_problem();
  CHECK(code_of([&] { barrier_objective(p, {9.6, 9.6}, 0.1); }) == ErrorCode::kDomainError);
  CHECK(code_of([&] { barrier_objective(p, {5, 5}, 0.1); }) == ErrorCode::kDomainError);
  CHECK(code_of([&] { barrier_objective(p, {-1, 50}, 0.1); }) == ErrorCode::kDomainError);
}

TEST_CASE("worked example: continuous optimum at (9.6, 9.6)") {
  const Allocation a = solve_interior_point(worked_problem());
  CHECK(a.continuous.q_g == doctest::Approx(9.6).epsilon(1e-5));
  CHECK(a.continuous.q_c == doctest::Approx(9.6).epsilon(1e-5));
  CHECK(a.continuous_distortion == doctest::Approx(11.2).epsilon(1e-6));
  CHECK(a.continuous_rate <= 1000.0 + 1e-6);
  CHECK(a.continuous_rate > 1000.0 - 1e-3);
  CHECK(a.outer_iterations == 2);
  CHECK(a.qp == QpPair{24, 24});
  CHECK(a.rounding_violation == 0.0);
  CHECK(a.predicted_rate == doctest::Approx(9600.0 / qp_to_step(24)).epsilon(1e-12));
  CHECK(a.predicted_distortion == doctest::Approx(0.75 * qp_to_step(24) + 4.0).epsilon(1e-12));
}

TEST_CASE("outer iteration count follows mu0, eta and epsilon") {
  SolverConfig cfg;
  cfg.eta = 0.01;
  // mu = 1e-1, 1e-3, 1e-5, 1e-7, 1e-9; the next value falls below 1e-10.
  CHECK(solve_interior_point(worked_problem(), cfg).outer_iterations == 5);
  cfg.eta = 0.5;
  const Allocation slow = solve_interior_point(worked_problem(), cfg);
  CHECK(slow.continuous.q_g == doctest::Approx(9.6).epsilon(1e-5));
}

TEST_CASE("a budget that never binds drives both steps to the finest grid step") {
  const Allocation a = solve_interior_point(worked_problem(5000.0));
  CHECK(a.qp == QpPair{22, 22});
  CHECK(a.continuous.q_g == doctest::Approx(8.0).epsilon(1e-4));
  CHECK(a.continuous.q_c == doctest::Approx(8.0).epsilon(1e-4));
  CHECK(a.predicted_rate < 5000.0);
}

TEST_CASE("solver errors") {
  CHECK(code_of([] { solve_interior_point(worked_problem(100.0)); }) == ErrorCode::kInfeasibleStart);
  AllocationProblem bad = worked_problem();
  bad.dm.a = -0.1;
  CHECK(code_of([&] { solve_interior_point(bad); }) == ErrorCode::kInvalidModel);
  bad = worked_problem();
  bad.rm.theta_c = 0.2;
  CHECK(code_of([&] { solve_interior_point(bad); }) == ErrorCode::kInvalidModel);
  SolverConfig cfg;
  cfg.eta = 1.5;
  CHECK(code_of([&] { solve_interior_point(worked_problem(), cfg); }) == ErrorCode::kInvalidArgument);
  cfg = {};
  cfg.start = {100.0, 50.0};
  CHECK(code_of([&] { solve_interior_point(worked_problem(), cfg); }) == ErrorCode::kInfeasibleStart);
}

TEST_CASE("continuous solutions beat a dense grid over the step range") {
  std::mt19937_64 rng(2718);
  const int n = 1000;
  const double lo = qp_to_step(kMinGridQp), hi = qp_to_step(kMaxGridQp);
  std::vector<double> q(n);
  for (int i = 0; i < n; ++i) q[i] = lo + (hi - lo) * i / (n - 1);
  std::vector<double> rg(n), rc(n);
  for (int t = 0; t < 200; ++t) {
    const AllocationProblem p = random_problem(rng);
    for (int i = 0; i < n; ++i) {
      rg[i] = p.rm.gamma_g * std::pow(q[i], p.rm.theta_g);
      rc[i] = p.rm.gamma_c * std::pow(q[i], p.rm.theta_c);
    }
    double best = INFINITY;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (rg[i] + rc[j] <= p.r_target) best = std::min(best, p.dm.a * q[i] + p.dm.b * q[j] + p.dm.c);
      }
    }
    const Allocation a = solve_interior_point(p);
    CHECK(a.continuous_distortion <= best + 1e-4);
    CHECK(a.continuous_rate <= p.r_target + 1e-6);
    // Complementary slackness: the budget binds or both steps sit at the finest step.
    const bool active = p.r_target - a.continuous_rate < 1e-3 * p.r_target;
    const bool at_min = a.continuous.q_g < lo + 1e-3 && a.continuous.q_c < lo + 1e-3;
    CHECK((active || at_min));
    CHECK(in_grid(a.qp));
  }
}

TEST_CASE("scaling the distortion model leaves the allocation unchanged") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 30; ++t) {
    AllocationProblem p = random_problem(rng);
    const Allocation base = solve_interior_point(p);
    for (double k : {0.1, 3.0, 250.0}) {
      AllocationProblem s = p;
      s.dm.a *= k;
      s.dm.b *= k;
      s.dm.c *= k;
      const Allocation scaled = solve_interior_point(s);
      CHECK(scaled.qp == base.qp);
      CHECK(scaled.continuous.q_g == doctest::Approx(base.continuous.q_g).epsilon(1e-4));
      CHECK(scaled.continuous.q_c == doctest::Approx(base.continuous.q_c).epsilon(1e-4));
    }
  }
}

TEST_CASE("round_to_grid") {
  const AllocationProblem p = worked_problem();
  // Nearest step: |9.6 - 8.98| = 0.62 > |9.6 - 10.08| = 0.48.
  Rounding r = round_to_grid(p, {9.6, 9.6});
  CHECK(r.qp == QpPair{24, 24});
  CHECK(r.violation == 0.0);

  r = round_to_grid(p, {qp_to_step(30), qp_to_step(27)});
  CHECK(r.qp == QpPair{30, 27});
  CHECK(r.violation == 0.0);

  // Out-of-range values clamp to the grid ends.
  r = round_to_grid(worked_problem(5000.0), {2.0, 500.0});
  CHECK(r.qp == QpPair{22, 42});

  // Exact midpoint between two steps goes to the larger step.
  const double mid = 0.5 * (qp_to_step(30) + qp_to_step(31));
  CHECK(round_to_grid(worked_problem(5000.0), {mid, mid}).qp == QpPair{31, 31});
}

TEST_CASE("round_to_grid coarsens the cheaper component when over budget") {
  AllocationProblem p = worked_problem();
  const QuantPair at{qp_to_step(26), qp_to_step(26)};
  p.r_target = predict_rate(p.rm, at).total - 1e-6;
  // a / |dR_g/dq| = 0.5 q^2 / 6400 versus b / |dR_c/dq| = 0.25 q^2 / 3200: equal, geometry first.
  Rounding r = round_to_grid(p, at);
  CHECK(r.qp == QpPair{27, 26});
  CHECK(r.violation == 0.0);

  p.dm.a = 2.0;  // geometry now costs more distortion per saved bit
  r = round_to_grid(p, at);
  CHECK(r.qp == QpPair{26, 27});
  CHECK(r.violation == 0.0);

  p.r_target = 1.0;  // nothing fits: grid exhausted, residual violation reported
  r = round_to_grid(p, at);
  CHECK(r.qp == QpPair{42, 42});
  CHECK(r.violation == doctest::Approx(predict_rate(p.rm, to_steps({42, 42})).total - 1.0));
}

TEST_CASE("exhaustive search") {
  const AllocationProblem p = worked_problem();
  int calls = 0;
  const GridOracle oracle = [&](const QpPair& qp) {
    ++calls;
    const QuantPair q = to_steps(qp);
    return GridObservation{predict_rate(p.rm, q).total, predict_distortion(p.dm, q)};
  };
  const ExhaustiveResult r = exhaustive_search(oracle, 1000.0);
  CHECK(r.evaluations == 441);
  CHECK(calls == 441);

  // Independent scan for the discrete optimum.
  QpPair best{};
  double best_d = INFINITY;
  for (int g = 22; g <= 42; ++g) {
    for (int c = 22; c <= 42; ++c) {
      const QuantPair q = to_steps({g, c});
      const double rate = 6400.0 / q.q_g + 3200.0 / q.q_c;
      const double d = 0.5 * q.q_g + 0.25 * q.q_c + 4.0;
      if (rate <= 1000.0 && d < best_d) {
        best_d = d;
        best = {g, c};
      }
    }
  }
  CHECK(r.qp == best);
  CHECK(r.qp == QpPair{24, 23});
  // The rounded model solution is one QP away: nearest rounding leaves budget unused.
  const Allocation a = solve_interior_point(p);
  CHECK(std::abs(a.qp.qp_g - r.qp.qp_g) + std::abs(a.qp.qp_c - r.qp.qp_c) == 1);

  CHECK(code_of([&] { exhaustive_search(oracle, 10.0); }) == ErrorCode::kInfeasibleBudget);
}

TEST_CASE("exhaustive search tie order: distortion, rate, qp_g, qp_c") {
  const GridOracle flat = [](const QpPair&) { return GridObservation{1.0, 2.0}; };
  CHECK(exhaustive_search(flat, 5.0).qp == QpPair{22, 22});
  const GridOracle rate_tie = [](const QpPair& qp) {
    return GridObservation{qp.qp_g == 30 && qp.qp_c == 40 ? 0.5 : 1.0, 2.0};
  };
  CHECK(exhaustive_search(rate_tie, 5.0).qp == QpPair{30, 40});
  const GridOracle by_c = [](const QpPair& qp) { return GridObservation{1.0, qp.qp_c == 35 ? 1.0 : 2.0}; };
  CHECK(exhaustive_search(by_c, 5.0).qp == QpPair{22, 35});
  CHECK(exhaustive_search(flat, 5.0, 30, 31).evaluations == 4);
}
