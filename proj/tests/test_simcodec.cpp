#include <cmath>
#include <random>

#include "bitalloc/error.hpp"
#include "bitalloc/simcodec.hpp"
#include "doctest.h"

using namespace bitalloc;

namespace {

// Share of d_c's sum of squares left after removing row and column means on a
// full product grid: the interaction energy no additive model can explain.
double interaction_fraction(const SyntheticCodecSpec& s, int lo, int hi) {
  const int n = hi - lo + 1;
  std::vector<double> y(static_cast<std::size_t>(n * n));
  for (int g = 0; g < n; ++g) {
    for (int c = 0; c < n; ++c) {
      const double qg = std::exp2((lo + g - 4) / 6.0), qc = std::exp2((lo + c - 4) / 6.0);
      y[static_cast<std::size_t>(g * n + c)] = s.alpha_gc * qg + s.alpha_cc * qc + s.beta_c + s.coupling * qg * qc;
    }
  }
  std::vector<double> row(static_cast<std::size_t>(n), 0.0), col(static_cast<std::size_t>(n), 0.0);
  double mean = 0.0;
  for (int g = 0; g < n; ++g) {
    for (int c = 0; c < n; ++c) {
      const double v = y[static_cast<std::size_t>(g * n + c)];
      row[static_cast<std::size_t>(g)] += v / n;
      col[static_cast<std::size_t>(c)] += v / n;
      mean += v / (n * n);
    }
  }
  double inter = 0.0, total = 0.0;
  for (int g = 0; g < n; ++g) {
    for (int c = 0; c < n; ++c) {
      const double v = y[static_cast<std::size_t>(g * n + c)];
      const double e = v - row[static_cast<std::size_t>(g)] - col[static_cast<std::size_t>(c)] + mean;
      inter += e * e;
      total += (v - mean) * (v - mean);
    }
  }
  return inter / total;
}

}  // namespace

TEST_CASE("noise-free encode follows the ground-truth models") {
  SyntheticCodecSpec s;
  s.alpha_g = 0.1;
  s.beta_g = 0.2;
  const EncodeResult e = encode(s, {22, 30});
  CHECK(e.d_g == doctest::Approx(1.0).epsilon(1e-15));
  const double qc = std::exp2(26.0 / 6.0);
  CHECK(e.d_c == doctest::Approx(s.alpha_gc * 8 + s.alpha_cc * qc + s.beta_c).epsilon(1e-14));
  CHECK(e.r_g == doctest::Approx(4000.0 * std::pow(8.0, -1.1)).epsilon(1e-14));
  CHECK(e.r_c == doctest::Approx(6000.0 * std::pow(qc, -1.3)).epsilon(1e-14));
  CHECK(e.qp == QpPair{22, 30});
  CHECK(e.encode_time_ms == s.encode_time_ms);
}

TEST_CASE("encode is deterministic and seed dependent") {
  SyntheticCodecSpec s;
  s.noise_rel = 0.05;
  s.seed = 17;
  const EncodeResult a = encode(s, {30, 31});
  const EncodeResult b = encode(s, {30, 31});
  CHECK(a.r_g == b.r_g);
  CHECK(a.r_c == b.r_c);
  CHECK(a.d_g == b.d_g);
  CHECK(a.d_c == b.d_c);
  s.seed = 18;
  const EncodeResult c = encode(s, {30, 31});
  CHECK(c.r_g != a.r_g);
  CHECK(c.d_c != a.d_c);
  const EncodeResult d = encode(s, {31, 30});
  CHECK(d.r_g != c.r_g);
}

TEST_CASE("noisy encode stays non-negative and centered") {
  SyntheticCodecSpec s;
  s.noise_rel = 0.3;
  s.beta_g = 0.0;
  s.alpha_g = 0.001;
  double sum_ratio = 0.0;
  const auto grid = full_grid();
  for (const QpPair& qp : grid) {
    const EncodeResult e = encode(s, qp);
    CHECK(e.d_g >= 0.0);
    CHECK(e.d_c >= 0.0);
    CHECK(e.r_g > 0.0);
    CHECK(e.r_c > 0.0);
    SyntheticCodecSpec clean = s;
    clean.noise_rel = 0.0;
    sum_ratio += e.r_c / encode(clean, qp).r_c;
  }
  CHECK(sum_ratio / grid.size() == doctest::Approx(std::exp(0.045)).epsilon(0.05));
}

TEST_CASE("overhead is carried separately from the coded rates") {
  SyntheticCodecSpec s;
  s.overhead_kbpmp = 12.5;
  const EncodeResult e = encode(s, {25, 25});
  CHECK(e.total_rate() == doctest::Approx(e.r_g + e.r_c + 12.5));
  CHECK(e.probe_record().r_g == e.r_g);
}

TEST_CASE("probe schedule") {
  const auto sched = probe_schedule();
  CHECK(sched[0] == QpPair{33, 25});
  CHECK(sched[1] == QpPair{34, 35});
  CHECK(sched[2] == QpPair{24, 33});
  // Affinely independent in the step domain.
  double m[3][3];
  for (int i = 0; i < 3; ++i) {
    m[i][0] = std::exp2((sched[i].qp_g - 4) / 6.0);
    m[i][1] = std::exp2((sched[i].qp_c - 4) / 6.0);
    m[i][2] = 1.0;
  }
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  CHECK(std::abs(det) > 10.0);
  CHECK(100.0 * sched.size() / full_grid().size() == doctest::Approx(0.68).epsilon(0.01 / 0.68));
}

TEST_CASE("grids") {
  CHECK(full_grid().size() == 441);
  CHECK(full_grid().front() == QpPair{22, 22});
  CHECK(full_grid().back() == QpPair{42, 42});
  const std::vector<int> g{22, 30}, c{25, 26, 27};
  const auto p = product_grid(g, c);
  REQUIRE(p.size() == 6);
  CHECK(p[3] == QpPair{30, 25});
}

TEST_CASE("uncoupled color distortion is additive on every rectangle") {
  SyntheticCodecSpec s;
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> qp(22, 42);
  for (int t = 0; t < 200; ++t) {
    const int g1 = qp(rng), g2 = qp(rng), c1 = qp(rng), c2 = qp(rng);
    const double lhs = encode(s, {g1, c1}).d_c + encode(s, {g2, c2}).d_c;
    const double rhs = encode(s, {g1, c2}).d_c + encode(s, {g2, c1}).d_c;
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
  }
}

TEST_CASE("separability: additive spec") {
  SyntheticCodecSpec s;
  const auto grid = full_grid();
  const SeparabilityReport r = validate_separability(s, grid);
  CHECK(r.residual_fraction < 1e-10);
  CHECK(r.scc == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.samples == 441);
  CHECK(r.geometry_levels == 21);
  CHECK(r.color_levels == 21);
}

TEST_CASE("separability residual equals the interaction share of d_c") {
  SyntheticCodecSpec s;
  for (double eps : {1e-4, 1e-3, 5e-3, 2e-2}) {
    s.coupling = eps;
    const SeparabilityReport r = validate_separability(s, full_grid());
    CHECK(r.residual_fraction == doctest::Approx(interaction_fraction(s, 22, 42)).epsilon(1e-9));
  }
}

TEST_CASE("separability: coupling carrying 10% of d_c variance") {
  SyntheticCodecSpec s;
  // Bisect the coupling so its non-additive part holds 10% of the variance.
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    s.coupling = 0.5 * (lo + hi);
    (interaction_fraction(s, 22, 42) < 0.10 ? lo : hi) = s.coupling;
  }
  const SeparabilityReport r = validate_separability(s, full_grid());
  CHECK(r.residual_fraction >= 0.05);
  CHECK(r.residual_fraction <= 0.15);
  CHECK(r.scc < 1.0);
}

TEST_CASE("separability with 1% noise keeps SCC above 0.96") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticCodecSpec s;
    s.noise_rel = 0.01;
    s.seed = seed;
    CHECK(validate_separability(s, full_grid()).scc >= 0.96);
  }
}

TEST_CASE("separability rejects degenerate grids") {
  SyntheticCodecSpec s;
  const std::vector<int> three{22, 30, 38}, four{22, 26, 30, 34};
  try {
    validate_separability(s, product_grid(three, four));
    FAIL("3x4 grid accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateGrid);
  }
  // Diagonal: four levels each but no way to separate the factors.
  const std::vector<QpPair> diag{{22, 22}, {26, 26}, {30, 30}, {34, 34}};
  CHECK_THROWS_AS(validate_separability(s, diag), Error);
  // Constant d_c.
  s.alpha_gc = 0.0;
  s.alpha_cc = 0.0;
  CHECK_THROWS_AS(validate_separability(s, product_grid(four, four)), Error);
}

TEST_CASE("spec validation") {
  SyntheticCodecSpec s;
  s.alpha_cc = -1.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  s.rate.theta_g = 0.5;
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  s.noise_rel = -0.1;
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  const DistortionModel m = s.distortion_model(0.25);
  CHECK(m.a == doctest::Approx(0.25 * s.alpha_g + 0.75 * s.alpha_gc));
  CHECK(m.b == doctest::Approx(0.75 * s.alpha_cc));
  CHECK(m.c == doctest::Approx(0.25 * s.beta_g + 0.75 * s.beta_c));
}
