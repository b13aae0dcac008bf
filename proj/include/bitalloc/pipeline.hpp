#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bitalloc/allocator.hpp"
#include "bitalloc/simcodec.hpp"
#include "json.hpp"

namespace bitalloc {

// JSON conversions for the config and report documents.
void to_json(nlohmann::json& j, const SyntheticCodecSpec& spec);
void from_json(const nlohmann::json& j, SyntheticCodecSpec& spec);
void to_json(nlohmann::json& j, const SolverConfig& cfg);
void from_json(const nlohmann::json& j, SolverConfig& cfg);
void to_json(nlohmann::json& j, const DistortionModel& m);
void from_json(const nlohmann::json& j, DistortionModel& m);
void to_json(nlohmann::json& j, const RateModel& m);
void from_json(const nlohmann::json& j, RateModel& m);
void to_json(nlohmann::json& j, const Allocation& a);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

// Models fitted from one probe log at one weighting factor.
struct FittedModels {
  DistortionModel distortion;
  RateModel rate;
  std::size_t probes = 0;
  bool least_squares = false;  // more than three probes
  // Filled only for least-squares fits; exact fits reproduce their probes.
  std::optional<nlohmann::json> accuracy;
};

// Three probes: exact solves. More: least squares plus SCC/RMSE/NRMSE of the
// distortion and both rate components over the probes.
FittedModels fit_models(const std::vector<ProbeRecord>& records, double omega);
nlohmann::json models_to_json(const FittedModels& fitted);

struct PipelineConfig {
  // Exactly one backend.
  std::optional<SyntheticCodecSpec> codec;
  std::optional<std::filesystem::path> probe_log;

  std::vector<double> targets_kbpmp;
  std::vector<double> omegas{0.5};
  bool exhaustive = true;
  SolverConfig solver;
  double color_peak = 255.0;
  std::optional<double> geometry_peak;  // default 2^bit_depth - 1
  double overhead_kbpmp = 0.0;          // probe-log backend only

  void validate() const;
};

// Relative paths inside the config resolve against `base_dir`.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

// One allocation row of the rate-distortion tables.
struct RdRow {
  double omega = 0.0;
  double target_kbpmp = 0.0;
  QpPair qp;
  double rate_kbpmp = 0.0;
  double psnr_db = 0.0;
};

struct PipelineResult {
  nlohmann::json report;  // sections: models, allocations, evaluation
  std::vector<RdRow> pba_rows;
  std::vector<RdRow> esa_rows;
};

PipelineResult run_pipeline(const PipelineConfig& config);

// CSV header `omega,target_kbpmp,qp_g,qp_c,rate_kbpmp,psnr_db`.
void write_rd_table(std::ostream& out, const std::vector<RdRow>& rows);
std::vector<RdRow> read_rd_table(std::istream& in);

// Compares two tables row by row (matched on omega and target): BE of each,
// QPE, and BD-PSNR of the second relative to the first per omega. CQ is
// included when both times are given.
nlohmann::json evaluate_tables(const std::vector<RdRow>& pba, const std::vector<RdRow>& esa,
                               std::optional<double> t_pba = std::nullopt,
                               std::optional<double> t_esa = std::nullopt);

}  // namespace bitalloc
