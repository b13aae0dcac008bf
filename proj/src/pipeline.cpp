#include "bitalloc/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string_view>

#include "bitalloc/error.hpp"
#include "bitalloc/eval.hpp"
#include "bitalloc/metrics.hpp"
#include "bitalloc/probe_log.hpp"

namespace bitalloc {

using nlohmann::json;

namespace {

void require_object(const json& j, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, std::string(section) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::kInvalidArgument, "unknown key '" + key + "' in " + std::string(section));
    }
  }
}

template <typename T>
void read_optional(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad value for '") + key + "': " + e.what());
  }
}

template <typename T>
void read_required(const json& j, const char* key, std::string_view section, T& out) {
  if (!j.contains(key)) {
    throw Error(ErrorCode::kInvalidArgument, std::string("missing key '") + key + "' in " + std::string(section));
  }
  read_optional(j, key, out);
}

json quant_json(const QuantPair& q) { return {{"q_g", q.q_g}, {"q_c", q.q_c}}; }
json qp_json(const QpPair& qp) { return {{"qp_g", qp.qp_g}, {"qp_c", qp.qp_c}}; }

json fit_quality_json(const std::vector<double>& actual, const std::vector<double>& fitted) {
  try {
    const FitQuality q = fit_quality(actual, fitted);
    json out{{"scc", q.scc}, {"rmse", q.rmse}};
    out["nrmse"] = q.nrmse ? json(*q.nrmse) : json(nullptr);
    return out;
  } catch (const Error& e) {
    return {{"error", std::string(to_string(e.code()))}};
  }
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Curve sorted by rate; nullopt when fewer than four distinct rates.
std::optional<std::vector<RdPoint>> rd_curve(const std::vector<RdRow>& rows) {
  std::vector<RdPoint> curve;
  std::set<double> distinct;
  for (const RdRow& r : rows) {
    if (!std::isfinite(r.psnr_db)) return std::nullopt;
    curve.push_back({r.rate_kbpmp, r.psnr_db});
    distinct.insert(r.rate_kbpmp);
  }
  if (distinct.size() < 4) return std::nullopt;
  std::stable_sort(curve.begin(), curve.end(), [](const RdPoint& l, const RdPoint& r) { return l.rate < r.rate; });
  return curve;
}

json bd_psnr_json(const std::vector<RdRow>& reference, const std::vector<RdRow>& test) {
  const auto a = rd_curve(reference);
  const auto b = rd_curve(test);
  if (!a || !b) return {{"bd_psnr_db", nullptr}, {"bd_psnr_note", "needs 4 distinct finite rate points per curve"}};
  try {
    return {{"bd_psnr_db", bd_psnr(*a, *b)}};
  } catch (const Error& e) {
    return {{"bd_psnr_db", nullptr}, {"bd_psnr_note", std::string(to_string(e.code()))}};
  }
}

}  // namespace

void to_json(json& j, const RateModel& m) {
  j = {{"gamma_g", m.gamma_g}, {"theta_g", m.theta_g}, {"gamma_c", m.gamma_c}, {"theta_c", m.theta_c}};
}

void from_json(const json& j, RateModel& m) {
  require_object(j, "rate model", {"gamma_g", "theta_g", "gamma_c", "theta_c"});
  read_required(j, "gamma_g", "rate model", m.gamma_g);
  read_required(j, "theta_g", "rate model", m.theta_g);
  read_required(j, "gamma_c", "rate model", m.gamma_c);
  read_required(j, "theta_c", "rate model", m.theta_c);
}

void to_json(json& j, const DistortionModel& m) {
  j = {{"a", m.a}, {"b", m.b}, {"c", m.c}, {"omega", m.omega}, {"warnings", m.warnings}};
}

void from_json(const json& j, DistortionModel& m) {
  require_object(j, "distortion model", {"a", "b", "c", "omega", "warnings"});
  read_required(j, "a", "distortion model", m.a);
  read_required(j, "b", "distortion model", m.b);
  read_required(j, "c", "distortion model", m.c);
  read_optional(j, "omega", m.omega);
  read_optional(j, "warnings", m.warnings);
}

void to_json(json& j, const SyntheticCodecSpec& s) {
  j = {{"alpha_g", s.alpha_g},
       {"beta_g", s.beta_g},
       {"alpha_gc", s.alpha_gc},
       {"alpha_cc", s.alpha_cc},
       {"beta_c", s.beta_c},
       {"coupling", s.coupling},
       {"rate", s.rate},
       {"noise_rel", s.noise_rel},
       {"overhead_kbpmp", s.overhead_kbpmp},
       {"encode_time_ms", s.encode_time_ms},
       {"bit_depth", s.bit_depth},
       {"seed", s.seed}};
}

void from_json(const json& j, SyntheticCodecSpec& s) {
  require_object(j, "codec",
                 {"alpha_g", "beta_g", "alpha_gc", "alpha_cc", "beta_c", "coupling", "rate", "noise_rel",
                  "overhead_kbpmp", "encode_time_ms", "bit_depth", "seed"});
  read_optional(j, "alpha_g", s.alpha_g);
  read_optional(j, "beta_g", s.beta_g);
  read_optional(j, "alpha_gc", s.alpha_gc);
  read_optional(j, "alpha_cc", s.alpha_cc);
  read_optional(j, "beta_c", s.beta_c);
  read_optional(j, "coupling", s.coupling);
  if (j.contains("rate")) s.rate = j.at("rate").get<RateModel>();
  read_optional(j, "noise_rel", s.noise_rel);
  read_optional(j, "overhead_kbpmp", s.overhead_kbpmp);
  read_optional(j, "encode_time_ms", s.encode_time_ms);
  read_optional(j, "bit_depth", s.bit_depth);
  read_optional(j, "seed", s.seed);
  s.validate();
}

void to_json(json& j, const SolverConfig& c) {
  j = {{"mu0", c.mu0},
       {"eta", c.eta},
       {"epsilon", c.epsilon},
       {"start", quant_json(c.start)},
       {"newton_tol", c.newton_tol},
       {"max_newton_iters", c.max_newton_iters},
       {"backtrack_factor", c.backtrack_factor},
       {"sufficient_decrease", c.sufficient_decrease},
       {"box_barrier", c.box_barrier}};
}

void from_json(const json& j, SolverConfig& c) {
  require_object(j, "solver",
                 {"mu0", "eta", "epsilon", "start", "newton_tol", "max_newton_iters", "backtrack_factor",
                  "sufficient_decrease", "box_barrier"});
  read_optional(j, "mu0", c.mu0);
  read_optional(j, "eta", c.eta);
  read_optional(j, "epsilon", c.epsilon);
  if (j.contains("start")) {
    const json& s = j.at("start");
    require_object(s, "solver.start", {"q_g", "q_c"});
    read_required(s, "q_g", "solver.start", c.start.q_g);
    read_required(s, "q_c", "solver.start", c.start.q_c);
  }
  read_optional(j, "newton_tol", c.newton_tol);
  read_optional(j, "max_newton_iters", c.max_newton_iters);
  read_optional(j, "backtrack_factor", c.backtrack_factor);
  read_optional(j, "sufficient_decrease", c.sufficient_decrease);
  read_optional(j, "box_barrier", c.box_barrier);
  c.validate();
}

void to_json(json& j, const Allocation& a) {
  j = {{"continuous",
        {{"q_g", a.continuous.q_g},
         {"q_c", a.continuous.q_c},
         {"rate_kbpmp", a.continuous_rate},
         {"distortion", a.continuous_distortion}}},
       {"qp", qp_json(a.qp)},
       {"predicted_rate_kbpmp", a.predicted_rate},
       {"predicted_distortion", a.predicted_distortion},
       {"rounding_violation_kbpmp", a.rounding_violation},
       {"outer_iterations", a.outer_iterations},
       {"newton_iterations", a.newton_iterations}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidArgument, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write to '" + path.string() + "' failed");
}

FittedModels fit_models(const std::vector<ProbeRecord>& records, double omega) {
  if (records.size() < 3) {
    throw Error(ErrorCode::kDegenerateProbes,
                "need at least three probes, got " + std::to_string(records.size()));
  }
  std::vector<ProbePoint> probes;
  for (const ProbeRecord& r : records) probes.push_back(r.at_omega(omega));

  FittedModels out;
  out.probes = probes.size();
  if (probes.size() == 3) {
    out.distortion = fit_distortion_model(probes[0], probes[1], probes[2], omega);
    out.rate = fit_rate_model(probes);
    return out;
  }

  out.least_squares = true;
  out.distortion = fit_distortion_model_least_squares(probes, omega);
  out.rate = fit_rate_model_least_squares(probes);
  std::vector<double> d, d_fit, rg, rg_fit, rc, rc_fit;
  for (const ProbePoint& p : probes) {
    const QuantPair q = to_steps(p.qp);
    const RatePrediction r = predict_rate(out.rate, q);
    d.push_back(p.d);
    d_fit.push_back(predict_distortion(out.distortion, q));
    rg.push_back(p.r_g);
    rg_fit.push_back(r.r_g);
    rc.push_back(p.r_c);
    rc_fit.push_back(r.r_c);
  }
  out.accuracy = json{{"distortion", fit_quality_json(d, d_fit)},
                      {"geometry_rate", fit_quality_json(rg, rg_fit)},
                      {"color_rate", fit_quality_json(rc, rc_fit)}};
  return out;
}

json models_to_json(const FittedModels& fitted) {
  json j{{"omega", fitted.distortion.omega},
         {"distortion", fitted.distortion},
         {"rate", fitted.rate},
         {"probes", fitted.probes},
         {"method", fitted.least_squares ? "least_squares" : "exact"}};
  if (fitted.accuracy) j["accuracy"] = *fitted.accuracy;
  return j;
}

void PipelineConfig::validate() const {
  if (codec.has_value() == probe_log.has_value()) {
    throw Error(ErrorCode::kInvalidArgument, "config must name exactly one backend: 'codec' or 'probe_log'");
  }
  if (targets_kbpmp.empty()) throw Error(ErrorCode::kInvalidArgument, "config lists no target bitrates");
  for (double t : targets_kbpmp) {
    if (!(t > 0.0)) throw Error(ErrorCode::kInvalidArgument, "target bitrates must be positive");
  }
  if (omegas.empty()) throw Error(ErrorCode::kInvalidArgument, "config lists no weighting factors");
  for (double w : omegas) {
    if (!(w >= 0.0 && w <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "weighting factors must lie in [0, 1]");
  }
  if (!(color_peak > 0.0)) throw Error(ErrorCode::kInvalidArgument, "color_peak must be positive");
  if (geometry_peak && !(*geometry_peak > 0.0)) throw Error(ErrorCode::kInvalidArgument, "geometry_peak must be positive");
  if (!(overhead_kbpmp >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "overhead_kbpmp must be non-negative");
  if (codec) codec->validate();
  solver.validate();
}

PipelineConfig pipeline_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  require_object(j, "config",
                 {"codec", "probe_log", "targets_kbpmp", "omegas", "exhaustive", "solver", "metric", "overhead_kbpmp"});
  PipelineConfig c;
  if (j.contains("codec")) c.codec = j.at("codec").get<SyntheticCodecSpec>();
  if (j.contains("probe_log")) {
    std::string path;
    read_optional(j, "probe_log", path);
    c.probe_log = base_dir.empty() ? std::filesystem::path(path) : base_dir / path;
  }
  read_required(j, "targets_kbpmp", "config", c.targets_kbpmp);
  read_optional(j, "omegas", c.omegas);
  read_optional(j, "exhaustive", c.exhaustive);
  if (j.contains("solver")) c.solver = j.at("solver").get<SolverConfig>();
  if (j.contains("metric")) {
    const json& m = j.at("metric");
    require_object(m, "metric", {"color_peak", "geometry_peak"});
    read_optional(m, "color_peak", c.color_peak);
    if (m.contains("geometry_peak")) {
      double peak = 0.0;
      read_optional(m, "geometry_peak", peak);
      c.geometry_peak = peak;
    }
  }
  read_optional(j, "overhead_kbpmp", c.overhead_kbpmp);
  c.validate();
  return c;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  config.validate();
  const bool simulated = config.codec.has_value();
  const int bit_depth = simulated ? config.codec->bit_depth : 10;
  const double geometry_peak = config.geometry_peak.value_or(geometry_peak_for(bit_depth));

  std::vector<ProbeRecord> records;
  double overhead = config.overhead_kbpmp;
  double probe_time_ms = 0.0;
  if (simulated) {
    for (const QpPair& qp : probe_schedule()) {
      const EncodeResult e = encode(*config.codec, qp);
      records.push_back(e.probe_record());
      probe_time_ms += e.encode_time_ms;
      overhead = e.overhead_kbpmp;
    }
  } else {
    records = read_probe_log(*config.probe_log);
  }

  PipelineResult result;
  json models = json::array();
  json allocations = json::array();
  json evaluation = json::array();

  for (double omega : config.omegas) {
    const FittedModels fitted = fit_models(records, omega);
    models.push_back(models_to_json(fitted));

    std::vector<double> be_pba, be_esa, delta_be, qpes;
    std::vector<RdRow> pba_rows, esa_rows;
    double esa_time_ms = 0.0;

    for (double target : config.targets_kbpmp) {
      AllocationProblem problem;
      problem.dm = fitted.distortion;
      problem.rm = fitted.rate;
      problem.r_target = target - overhead;
      if (!(problem.r_target > 0.0)) {
        throw Error(ErrorCode::kInfeasibleBudget, "target " + std::to_string(target) +
                                                      " kbpmp does not cover the fixed overhead");
      }
      const Allocation alloc = solve_interior_point(problem, config.solver);

      json row{{"omega", omega}, {"target_kbpmp", target}, {"budget_kbpmp", problem.r_target}};
      json pba = alloc;
      RdRow pba_row{omega, target, alloc.qp, alloc.predicted_rate + overhead, 0.0};

      if (simulated) {
        const EncodeResult actual = encode(*config.codec, alloc.qp);
        const double d = omega * actual.d_g + (1.0 - omega) * actual.d_c;
        pba_row.rate_kbpmp = actual.total_rate();
        pba_row.psnr_db = psnr(actual.d_g, actual.d_c, omega, geometry_peak, config.color_peak);
        pba["actual"] = {{"rate_kbpmp", pba_row.rate_kbpmp},
                         {"d_g", actual.d_g},
                         {"d_c", actual.d_c},
                         {"distortion", d},
                         {"psnr_db", pba_row.psnr_db}};
      } else {
        // No codec to run: rate is the model prediction plus overhead, PSNR unknown.
        pba_row.psnr_db = std::numeric_limits<double>::quiet_NaN();
        pba["predicted_total_rate_kbpmp"] = pba_row.rate_kbpmp;
      }
      const double be = compute_be(pba_row.rate_kbpmp, target);
      pba["be_pct"] = be;
      be_pba.push_back(be);
      row["pba"] = pba;
      pba_rows.push_back(pba_row);

      if (simulated && config.exhaustive) {
        const SyntheticCodecSpec& codec = *config.codec;
        const ExhaustiveResult esa = exhaustive_search(
            [&](const QpPair& qp) {
              const EncodeResult e = encode(codec, qp);
              return GridObservation{e.total_rate(), omega * e.d_g + (1.0 - omega) * e.d_c};
            },
            target);
        esa_time_ms = esa.evaluations * codec.encode_time_ms;
        const EncodeResult e = encode(codec, esa.qp);
        RdRow esa_row{omega, target, esa.qp, e.total_rate(),
                      psnr(e.d_g, e.d_c, omega, geometry_peak, config.color_peak)};
        const double be_e = compute_be(esa_row.rate_kbpmp, target);
        const int qpe = compute_qpe(alloc.qp, esa.qp);
        row["esa"] = {{"qp", qp_json(esa.qp)},
                      {"rate_kbpmp", esa_row.rate_kbpmp},
                      {"d_g", e.d_g},
                      {"d_c", e.d_c},
                      {"distortion", esa.observation.distortion},
                      {"psnr_db", esa_row.psnr_db},
                      {"be_pct", be_e},
                      {"evaluations", esa.evaluations}};
        row["qpe"] = qpe;
        be_esa.push_back(be_e);
        delta_be.push_back(std::abs(be - be_e));
        qpes.push_back(qpe);
        esa_rows.push_back(esa_row);
      }
      allocations.push_back(std::move(row));
    }

    json eval{{"omega", omega}, {"avg_be_pba_pct", mean(be_pba)}};
    if (!esa_rows.empty()) {
      eval["avg_be_esa_pct"] = mean(be_esa);
      eval["avg_abs_delta_be_pct"] = mean(delta_be);
      eval["avg_qpe"] = mean(qpes);
      // Simulated clock: only pre-encodings cost time, the solver is free.
      eval["cq_pct"] = compute_cq(probe_time_ms, esa_time_ms);
      eval.update(bd_psnr_json(esa_rows, pba_rows));
    }
    evaluation.push_back(std::move(eval));
    result.pba_rows.insert(result.pba_rows.end(), pba_rows.begin(), pba_rows.end());
    result.esa_rows.insert(result.esa_rows.end(), esa_rows.begin(), esa_rows.end());
  }

  result.report = {{"backend", simulated ? "simcodec" : "probe_log"},
                   {"models", std::move(models)},
                   {"allocations", std::move(allocations)},
                   {"evaluation", std::move(evaluation)}};
  return result;
}

void write_rd_table(std::ostream& out, const std::vector<RdRow>& rows) {
  out << "omega,target_kbpmp,qp_g,qp_c,rate_kbpmp,psnr_db\n";
  for (const RdRow& r : rows) {
    out << format_number(r.omega) << ',' << format_number(r.target_kbpmp) << ',' << r.qp.qp_g << ',' << r.qp.qp_c
        << ',' << format_number(r.rate_kbpmp) << ',';
    if (std::isfinite(r.psnr_db)) {
      out << format_number(r.psnr_db) << '\n';
    } else {
      out << (std::isnan(r.psnr_db) ? "nan" : "inf") << '\n';
    }
  }
}

std::vector<RdRow> read_rd_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kInvalidArgument, "rate-distortion table is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "omega,target_kbpmp,qp_g,qp_c,rate_kbpmp,psnr_db") {
    throw Error(ErrorCode::kInvalidArgument, "unexpected rate-distortion table header '" + line + "'");
  }
  std::vector<RdRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != 6) {
      throw Error(ErrorCode::kInvalidArgument, "table line " + std::to_string(line_no) + ": expected 6 fields");
    }
    auto num = [&](const std::string& s) {
      if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
      if (s == "inf") return std::numeric_limits<double>::infinity();
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::kInvalidArgument, "table line " + std::to_string(line_no) + ": bad number '" + s + "'");
      }
      return v;
    };
    RdRow r;
    r.omega = num(f[0]);
    r.target_kbpmp = num(f[1]);
    r.qp = {static_cast<int>(num(f[2])), static_cast<int>(num(f[3]))};
    r.rate_kbpmp = num(f[4]);
    r.psnr_db = num(f[5]);
    rows.push_back(r);
  }
  return rows;
}

json evaluate_tables(const std::vector<RdRow>& pba, const std::vector<RdRow>& esa, std::optional<double> t_pba,
                     std::optional<double> t_esa) {
  std::map<std::pair<double, double>, const RdRow*> esa_by_key;
  for (const RdRow& r : esa) esa_by_key[{r.omega, r.target_kbpmp}] = &r;

  json rows = json::array();
  std::map<double, std::vector<RdRow>> pba_by_omega, esa_by_omega;
  std::map<double, std::vector<double>> be_p, be_e, dbe, qpe;
  for (const RdRow& p : pba) {
    auto it = esa_by_key.find({p.omega, p.target_kbpmp});
    if (it == esa_by_key.end()) {
      throw Error(ErrorCode::kInvalidArgument, "no exhaustive-search row for omega " + std::to_string(p.omega) +
                                                   ", target " + std::to_string(p.target_kbpmp));
    }
    const RdRow& e = *it->second;
    const double bp = compute_be(p.rate_kbpmp, p.target_kbpmp);
    const double be = compute_be(e.rate_kbpmp, e.target_kbpmp);
    const int q = compute_qpe(p.qp, e.qp);
    rows.push_back({{"omega", p.omega},
                    {"target_kbpmp", p.target_kbpmp},
                    {"be_pba_pct", bp},
                    {"be_esa_pct", be},
                    {"abs_delta_be_pct", std::abs(bp - be)},
                    {"qpe", q}});
    pba_by_omega[p.omega].push_back(p);
    esa_by_omega[p.omega].push_back(e);
    be_p[p.omega].push_back(bp);
    be_e[p.omega].push_back(be);
    dbe[p.omega].push_back(std::abs(bp - be));
    qpe[p.omega].push_back(q);
  }

  json summary = json::array();
  for (const auto& [omega, rows_p] : pba_by_omega) {
    json s{{"omega", omega},
           {"avg_be_pba_pct", mean(be_p[omega])},
           {"avg_be_esa_pct", mean(be_e[omega])},
           {"avg_abs_delta_be_pct", mean(dbe[omega])},
           {"avg_qpe", mean(qpe[omega])}};
    s.update(bd_psnr_json(esa_by_omega[omega], rows_p));
    summary.push_back(std::move(s));
  }
  json out{{"rows", std::move(rows)}, {"summary", std::move(summary)}};
  if (t_pba && t_esa) out["cq_pct"] = compute_cq(*t_pba, *t_esa);
  return out;
}

}  // namespace bitalloc
