// bitalloc: joint geometry/color bit allocation for point-cloud coding.
//
//   bitalloc metric A.ply B.ply [--omega W]
//   bitalloc fit --probes log.csv --omega W [--out models.json]
//   bitalloc allocate --model models.json --target R [--out allocation.json]
//   bitalloc simulate --spec config.json [--out report.json] [--csv-prefix P]
//   bitalloc evaluate --pba pba.csv --esa esa.csv [--t-pba S --t-esa S]
//
// Exit codes: 0 success, 2 validation, 3 infeasible, 4 I/O, 1 numerical.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "bitalloc/allocator.hpp"
#include "bitalloc/cloud.hpp"
#include "bitalloc/error.hpp"
#include "bitalloc/metrics.hpp"
#include "bitalloc/pipeline.hpp"
#include "bitalloc/probe_log.hpp"

namespace {

using bitalloc::Error;
using bitalloc::ErrorCode;
using nlohmann::json;

void emit(const json& doc, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    bitalloc::write_json_file(out_path, doc);
  }
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  return out;
}

int report_error(const Error& e) {
  const json err{{"error",
                  {{"category", std::string(to_string(e.category()))},
                   {"code", std::string(to_string(e.code()))},
                   {"message", e.what()}}}};
  std::cerr << err.dump() << '\n';
  return bitalloc::exit_code_of(e.category());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-based geometry/color bit allocation for point-cloud coding"};
  app.require_subcommand(1);

  // metric
  std::string ply_a, ply_b, luma = "bt709";
  double metric_omega = 0.5, color_peak = 255.0;
  std::optional<double> geometry_peak;
  unsigned threads = 0;
  auto* metric = app.add_subcommand("metric", "Symmetric point-to-point distortion and PSNR between two PLY files");
  metric->add_option("reference", ply_a, "Reference cloud (PLY)")->required();
  metric->add_option("reconstructed", ply_b, "Reconstructed cloud (PLY)")->required();
  metric->add_option("--omega", metric_omega, "Geometry weight in [0,1]")->check(CLI::Range(0.0, 1.0));
  metric->add_option("--luma", luma, "RGB to Y matrix")->check(CLI::IsMember({"bt709", "bt601"}));
  metric->add_option("--geometry-peak", geometry_peak, "Geometry PSNR peak (default 2^bit_depth - 1)");
  metric->add_option("--color-peak", color_peak, "Color PSNR peak");
  metric->add_option("--threads", threads, "Worker threads (0 = all cores)");

  // fit
  std::string probes_path, fit_out;
  double fit_omega = 0.5;
  auto* fit = app.add_subcommand("fit", "Fit distortion and rate models from a probe log");
  fit->add_option("--probes", probes_path, "Probe log CSV")->required();
  fit->add_option("--omega", fit_omega, "Geometry weight in [0,1]")->required()->check(CLI::Range(0.0, 1.0));
  fit->add_option("--out", fit_out, "Write models JSON here instead of stdout");

  // allocate
  std::string model_path, solver_path, alloc_out;
  double target = 0.0;
  auto* allocate = app.add_subcommand("allocate", "Solve the allocation for one target rate");
  allocate->add_option("--model", model_path, "Models JSON written by `fit`")->required();
  allocate->add_option("--target", target, "Geometry + color budget in kbpmp")->required();
  allocate->add_option("--solver", solver_path, "Solver settings JSON");
  allocate->add_option("--out", alloc_out, "Write allocation JSON here instead of stdout");

  // simulate
  std::string spec_path, sim_out, csv_prefix, probe_log_out;
  auto* simulate = app.add_subcommand("simulate", "Run probe, fit, allocate and exhaustive search on a config");
  simulate->add_option("--spec", spec_path, "Pipeline config JSON")->required();
  simulate->add_option("--out", sim_out, "Write report JSON here instead of stdout");
  simulate->add_option("--csv-prefix", csv_prefix, "Write <prefix>_pba.csv and <prefix>_esa.csv tables");
  simulate->add_option("--probe-log", probe_log_out, "Also write the simulated probes as a probe log");

  // evaluate
  std::string pba_path, esa_path, eval_out;
  std::optional<double> t_pba, t_esa;
  auto* evaluate = app.add_subcommand("evaluate", "Compare model-based and exhaustive-search tables");
  evaluate->add_option("--pba", pba_path, "Model-based allocation table CSV")->required();
  evaluate->add_option("--esa", esa_path, "Exhaustive-search table CSV")->required();
  evaluate->add_option("--t-pba", t_pba, "Model-based encoding time");
  evaluate->add_option("--t-esa", t_esa, "Exhaustive-search encoding time");
  evaluate->add_option("--out", eval_out, "Write evaluation JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*metric) {
      std::vector<std::string> warnings;
      const bitalloc::PointCloud a = bitalloc::load_ply(ply_a, &warnings);
      const bitalloc::PointCloud b = bitalloc::load_ply(ply_b, &warnings);
      for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
      bitalloc::MetricOptions options;
      options.luma = luma == "bt601" ? bitalloc::LumaMatrix::kBt601 : bitalloc::LumaMatrix::kBt709;
      options.threads = threads;
      const bitalloc::DistortionPair d = bitalloc::symmetric_distortion(a, b, options);
      const double peak = geometry_peak.value_or(bitalloc::geometry_peak_for(std::max(a.bit_depth(), b.bit_depth())));
      emit({{"d_g", d.d_g},
            {"d_c", d.d_c},
            {"omega", metric_omega},
            {"distortion", bitalloc::combined_distortion(d, metric_omega)},
            {"psnr_db", bitalloc::psnr(d.d_g, d.d_c, metric_omega, peak, color_peak)},
            {"geometry_peak", peak},
            {"color_peak", color_peak}},
           "");
    } else if (*fit) {
      const auto records = bitalloc::read_probe_log(probes_path);
      emit(bitalloc::models_to_json(bitalloc::fit_models(records, fit_omega)), fit_out);
    } else if (*allocate) {
      const json model = bitalloc::read_json_file(model_path);
      bitalloc::AllocationProblem problem;
      try {
        problem.dm = model.at("distortion").get<bitalloc::DistortionModel>();
        problem.rm = model.at("rate").get<bitalloc::RateModel>();
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kInvalidArgument, std::string("bad model file: ") + e.what());
      }
      problem.r_target = target;
      bitalloc::SolverConfig solver;
      if (!solver_path.empty()) solver = bitalloc::read_json_file(solver_path).get<bitalloc::SolverConfig>();
      const bitalloc::Allocation a = bitalloc::solve_interior_point(problem, solver);
      json doc = a;
      doc["target_kbpmp"] = target;
      emit(doc, alloc_out);
    } else if (*simulate) {
      const std::filesystem::path spec_file(spec_path);
      const bitalloc::PipelineConfig config =
          bitalloc::pipeline_config_from_json(bitalloc::read_json_file(spec_file), spec_file.parent_path());
      const bitalloc::PipelineResult result = bitalloc::run_pipeline(config);
      if (!csv_prefix.empty()) {
        auto pba = open_output(csv_prefix + "_pba.csv");
        bitalloc::write_rd_table(pba, result.pba_rows);
        auto esa = open_output(csv_prefix + "_esa.csv");
        bitalloc::write_rd_table(esa, result.esa_rows);
      }
      if (!probe_log_out.empty()) {
        if (!config.codec) throw Error(ErrorCode::kInvalidArgument, "--probe-log needs a codec backend");
        auto out = open_output(probe_log_out);
        bitalloc::write_probe_log_header(out);
        for (const bitalloc::QpPair& qp : bitalloc::probe_schedule()) {
          bitalloc::append_probe_record(out, bitalloc::encode(*config.codec, qp).probe_record());
        }
      }
      emit(result.report, sim_out);
    } else if (*evaluate) {
      std::ifstream pba(pba_path), esa(esa_path);
      if (!pba) throw Error(ErrorCode::kIo, "cannot open '" + pba_path + "'");
      if (!esa) throw Error(ErrorCode::kIo, "cannot open '" + esa_path + "'");
      emit(bitalloc::evaluate_tables(bitalloc::read_rd_table(pba), bitalloc::read_rd_table(esa), t_pba, t_esa),
           eval_out);
    }
  } catch (const Error& e) {
    return report_error(e);
  }
  return 0;
}
