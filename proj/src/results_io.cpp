#include "tclsafe/results_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tclsafe/error.hpp"

namespace tclsafe::io {

using nlohmann::json;

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, path);
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string optional_csv(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

}  // namespace

void write_results_jsonl(const harness::ScenarioResult& result, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& r : result.records) {
    json line = {{"t", r.t},
                 {"time_s", r.time_seconds},
                 {"p_ref", r.p_ref},
                 {"p_agg", r.p_agg},
                 {"u", optional_number(r.u)},
                 {"lower", r.lower},
                 {"upper", r.upper},
                 {"min_voltage", optional_number(r.min_voltage)},
                 {"safe", r.safe},
                 {"samples_used", r.samples_used},
                 {"infeasible", r.infeasible},
                 {"w_on_hat", r.w_on_hat},
                 {"w_off_hat", r.w_off_hat},
                 {"w_on_actual", optional_number(r.w_on_actual)},
                 {"w_off_actual", optional_number(r.w_off_actual)}};
    if (!r.solver_error.empty()) line["solver_error"] = r.solver_error;
    out << line.dump() << '\n';
  }
  write_file(path, out.str());
}

void write_constraints_jsonl(const harness::ScenarioResult& result, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& r : result.records) {
    out << json{{"t", r.t},
                {"lower", r.lower},
                {"upper", r.upper},
                {"samples_used", r.samples_used},
                {"accepted_m", r.accepted_m},
                {"infeasible", r.infeasible}}
               .dump()
        << '\n';
  }
  write_file(path, out.str());
}

void write_summary_csv(const std::vector<harness::ScenarioResult>& results, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "name,controller,seed,epsilon,steps,rmse_kw,safety_probability,violation_count\n";
  for (const auto& r : results) {
    out << r.name << ',' << harness::to_string(r.controller) << ',' << r.seed << ',' << format_number(r.epsilon)
        << ',' << r.summary.steps << ',' << format_number(r.summary.rmse_kw) << ','
        << format_number(r.summary.safety_probability) << ',' << r.summary.violation_count << '\n';
  }
  write_file(path, out.str());
}

void write_trace_csv(const harness::ScenarioResult& result, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "t,time_h,p_ref_kw,p_agg_kw,u,lower,upper,min_voltage,safe\n";
  for (const auto& r : result.records) {
    out << r.t << ',' << format_number(r.time_seconds / 3600.0) << ',' << format_number(r.p_ref) << ','
        << format_number(r.p_agg) << ',' << optional_csv(r.u) << ',' << format_number(r.lower) << ','
        << format_number(r.upper) << ',' << optional_csv(r.min_voltage) << ',' << (r.safe ? 1 : 0) << '\n';
  }
  write_file(path, out.str());
}

void write_curve_csv(const std::vector<utility::CurvePoint>& curve, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "u,nu_hat,stderr,n_s\n";
  for (const auto& p : curve)
    out << format_number(p.u) << ',' << format_number(p.nu_hat) << ',' << format_number(p.std_error) << ','
        << p.samples << '\n';
  write_file(path, out.str());
}

void write_comparison_csv(const harness::Comparison& comparison, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "controller,epsilon,rmse_kw,safety_probability,violations,steps,seeds\n";
  for (const auto& r : comparison.rows)
    out << r.controller << ',' << format_number(r.epsilon) << ',' << format_number(r.mean_rmse_kw) << ','
        << format_number(r.mean_safety) << ',' << r.total_violations << ',' << r.total_steps << ',' << r.seeds
        << '\n';
  write_file(path, out.str());
}

void write_study_csv(const certification::TestOptions& options, const std::vector<StudyRow>& rows,
                     const std::filesystem::path& path) {
  std::ostringstream out;
  out << "nu,epsilon,beta,max_samples,trials,accepted,acceptance_rate,mean_samples,minimal_samples\n";
  const auto minimal = certification::minimal_samples(options.epsilon, options.beta);
  for (const auto& r : rows)
    out << format_number(r.nu) << ',' << format_number(options.epsilon) << ',' << format_number(options.beta) << ','
        << options.max_samples << ',' << r.result.trials << ',' << r.result.accepted << ','
        << format_number(r.result.acceptance_rate) << ',' << format_number(r.result.mean_samples) << ','
        << minimal << '\n';
  write_file(path, out.str());
}

}  // namespace tclsafe::io
