#include <cmath>
#include <vector>

#include "bitalloc/error.hpp"
#include "bitalloc/eval.hpp"
#include "doctest.h"

using namespace bitalloc;

namespace {

// Table values are printed to one decimal; allow for binary representation
// of the inputs on top of the stated half-unit tolerance.
constexpr double kRepr = 1e-9;

// Cubic through the curve by normal equations, solved independently of the library.
std::array<double, 4> cubic_fit(const std::vector<RdPoint>& pts) {
  double m[4][5] = {};
  for (const RdPoint& p : pts) {
    const double x = std::log10(p.rate);
    double pw[7] = {1};
    for (int k = 1; k < 7; ++k) pw[k] = pw[k - 1] * x;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) m[r][c] += pw[r + c];
      m[r][4] += pw[r] * p.psnr;
    }
  }
  for (int k = 0; k < 4; ++k) {
    int piv = k;
    for (int r = k + 1; r < 4; ++r) {
      if (std::abs(m[r][k]) > std::abs(m[piv][k])) piv = r;
    }
    for (int c = 0; c < 5; ++c) std::swap(m[k][c], m[piv][c]);
    for (int r = 0; r < 4; ++r) {
      if (r == k) continue;
      const double f = m[r][k] / m[k][k];
      for (int c = 0; c < 5; ++c) m[r][c] -= f * m[k][c];
    }
  }
  return {m[0][4] / m[0][0], m[1][4] / m[1][1], m[2][4] / m[2][2], m[3][4] / m[3][3]};
}

double eval_cubic(const std::array<double, 4>& p, double x) { return ((p[3] * x + p[2]) * x + p[1]) * x + p[0]; }

double trapezoid_bd(const std::vector<RdPoint>& a, const std::vector<RdPoint>& b, int samples) {
  const auto pa = cubic_fit(a), pb = cubic_fit(b);
  const double lo = std::max(std::log10(a.front().rate), std::log10(b.front().rate));
  const double hi = std::min(std::log10(a.back().rate), std::log10(b.back().rate));
  const double h = (hi - lo) / samples;
  double sum = 0.0;
  for (int i = 0; i <= samples; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == samples) ? 0.5 : 1.0;
    sum += w * (eval_cubic(pb, x) - eval_cubic(pa, x));
  }
  return sum * h / (hi - lo);
}

}  // namespace

TEST_CASE("bitrate error") {
  CHECK(std::abs(compute_be(232.7, 240.0) - 3.0) <= 0.05 + kRepr);
  CHECK(compute_be(240.0, 240.0) == 0.0);
  CHECK(std::abs(compute_be(94.8, 96.0) - 1.2) <= 0.05 + kRepr);
  CHECK(compute_be(110.0, 100.0) == doctest::Approx(10.0));
  CHECK_THROWS_AS(compute_be(1.0, 0.0), Error);
}

TEST_CASE("QP error") {
  CHECK(compute_qpe({27, 33}, {27, 33}) == 0);
  CHECK(compute_qpe({32, 32}, {36, 31}) == 5);
  CHECK(compute_qpe({40, 40}, {42, 40}) == 2);
}

TEST_CASE("complexity quotient") {
  CHECK(std::abs(compute_cq(364.08, 53342.84) - 0.68) <= 0.01);
  CHECK(compute_cq(5.0, 5.0) == 100.0);
  CHECK(compute_cq(3.0, 441.0) == doctest::Approx(0.68).epsilon(0.01 / 0.68));
  CHECK_THROWS_AS(compute_cq(1.0, 0.0), Error);
}

TEST_CASE("cubic fit interpolates four points exactly") {
  const std::vector<RdPoint> c{{100, 30}, {200, 33}, {400, 35.5}, {800, 37}};
  const auto p = fit_log_rate_cubic(c);
  for (const RdPoint& pt : c) CHECK(eval_cubic(p, std::log10(pt.rate)) == doctest::Approx(pt.psnr).epsilon(1e-9));
}

TEST_CASE("BD-PSNR identities") {
  const std::vector<RdPoint> a{{100, 30}, {200, 33}, {400, 35.5}, {800, 37}, {1600, 38.1}};
  CHECK(bd_psnr(a, a) == doctest::Approx(0.0).epsilon(1e-12));
  std::vector<RdPoint> b = a;
  for (RdPoint& p : b) p.psnr += 1.0;
  CHECK(bd_psnr(a, b) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(bd_psnr(b, a) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("BD-PSNR matches dense trapezoidal integration") {
  const std::vector<RdPoint> a{{90, 29.1}, {170, 32.4}, {330, 35.0}, {610, 36.9}, {1150, 38.2}};
  const std::vector<RdPoint> b{{120, 30.6}, {210, 33.1}, {390, 35.9}, {700, 37.4}, {1400, 39.0}};
  const double want = trapezoid_bd(a, b, 10000);
  CHECK(std::abs(bd_psnr(a, b) - want) < 1e-4);
  CHECK(std::abs(bd_psnr(b, a) + want) < 1e-4);
}

TEST_CASE("BD-PSNR input errors") {
  const std::vector<RdPoint> a{{100, 30}, {200, 33}, {400, 35.5}, {800, 37}};
  const std::vector<RdPoint> far{{5000, 30}, {6000, 33}, {7000, 35.5}, {8000, 37}};
  try {
    bd_psnr(a, far);
    FAIL("disjoint ranges accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonOverlappingRates);
  }
  const std::vector<RdPoint> three{{100, 30}, {200, 33}, {400, 35.5}};
  CHECK_THROWS_AS(bd_psnr(a, three), Error);
  const std::vector<RdPoint> unsorted{{100, 30}, {400, 35.5}, {200, 33}, {800, 37}};
  CHECK_THROWS_AS(bd_psnr(a, unsorted), Error);
  const std::vector<RdPoint> zero{{0, 30}, {200, 33}, {400, 35.5}, {800, 37}};
  CHECK_THROWS_AS(bd_psnr(zero, a), Error);
}
