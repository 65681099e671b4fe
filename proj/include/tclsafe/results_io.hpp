#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tclsafe/certification.hpp"
#include "tclsafe/harness.hpp"
#include "tclsafe/utility.hpp"

namespace tclsafe::io {

/// Shortest round-trip decimal form; the same double always prints the same.
std::string format_number(double value);

/// Every writer fills `path` through a temporary file and a rename, so a
/// failed run never leaves a partial file behind. Wall time is kept out of
/// all files to keep them byte-identical across runs.
void write_results_jsonl(const harness::ScenarioResult& result, const std::filesystem::path& path);
void write_constraints_jsonl(const harness::ScenarioResult& result, const std::filesystem::path& path);
void write_summary_csv(const std::vector<harness::ScenarioResult>& results, const std::filesystem::path& path);
/// Tidy trace for plotting: p_ref, p_agg and minimum voltage per step.
void write_trace_csv(const harness::ScenarioResult& result, const std::filesystem::path& path);
void write_curve_csv(const std::vector<utility::CurvePoint>& curve, const std::filesystem::path& path);
void write_comparison_csv(const harness::Comparison& comparison, const std::filesystem::path& path);

struct StudyRow {
  double nu = 0.0;
  certification::StudyResult result;
};

void write_study_csv(const certification::TestOptions& options, const std::vector<StudyRow>& rows,
                     const std::filesystem::path& path);

/// Write `content` to `path` atomically.
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace tclsafe::io
