#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "bitalloc/models.hpp"

namespace bitalloc {

// Ground truth for the stand-in codec:
//   d_g = alpha_g q_g + beta_g
//   d_c = alpha_gc q_g + alpha_cc q_c + beta_c + coupling q_g q_c
//   r_g = gamma_g q_g^theta_g,  r_c = gamma_c q_c^theta_c
// `coupling` breaks the additive color structure on purpose; keep it at 0 for
// a codec that satisfies the model assumptions.
struct SyntheticCodecSpec {
  double alpha_g = 0.02;
  double beta_g = 0.2;
  double alpha_gc = 0.2;
  double alpha_cc = 0.8;
  double beta_c = 5.0;
  double coupling = 0.0;
  RateModel rate{4000.0, -1.1, 6000.0, -1.3};
  double noise_rel = 0.0;
  double overhead_kbpmp = 0.0;
  double encode_time_ms = 1000.0;
  int bit_depth = 10;
  std::uint64_t seed = 1;

  // (a, b, c) the three-probe fit should recover at `omega` when coupling = 0.
  DistortionModel distortion_model(double omega) const;
  void validate() const;
};

struct EncodeResult {
  QpPair qp;
  double r_g = 0.0;
  double r_c = 0.0;
  double overhead_kbpmp = 0.0;
  double d_g = 0.0;
  double d_c = 0.0;
  double encode_time_ms = 0.0;

  double total_rate() const noexcept { return r_g + r_c + overhead_kbpmp; }
  ProbeRecord probe_record() const noexcept { return {qp, r_g, r_c, d_g, d_c}; }
};

// Pure function of (spec, qp); noise is drawn from a generator seeded by both.
EncodeResult encode(const SyntheticCodecSpec& spec, const QpPair& qp);

// The three pre-encodings used to fit the models.
std::array<QpPair, 3> probe_schedule();

// Every pair of the product qp_g_levels x qp_c_levels.
std::vector<QpPair> product_grid(std::span<const int> qp_g_levels, std::span<const int> qp_c_levels);
std::vector<QpPair> full_grid(int min_qp = kMinGridQp, int max_qp = kMaxGridQp);

struct SeparabilityReport {
  double residual_fraction = 0.0;  // residual energy / total energy of d_c about its mean
  double scc = 0.0;                // of the additive fit
  std::size_t samples = 0;
  std::size_t geometry_levels = 0;
  std::size_t color_levels = 0;
};

// Fits d_c = f_g(q_g) + f_c(q_c) (one free value per level) by least squares
// over `grid` and reports how much of d_c the additive form fails to explain.
SeparabilityReport validate_separability(const SyntheticCodecSpec& spec, std::span<const QpPair> grid);

}  // namespace bitalloc
