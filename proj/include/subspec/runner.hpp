#pragma once

// Case execution over sweep points and the report, plot-data and summary
// serializers.

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "subspec/config.hpp"

namespace subspec {

struct Failure {
  std::string step;
  std::string message;
};

struct PointResult {
  int index = 0;
  std::map<SweepAxis, double> point;
  SubmersionCase c;
  /// base, schrodinger and total bottoms; absent when the step failed.
  std::optional<SpectrumReport> base;
  std::optional<SpectrumReport> schrodinger;
  std::optional<SpectrumReport> total;
  std::optional<SpectrumReport> spectrum;
  std::vector<TheoremReport> reports;
  std::vector<Failure> failures;
};

struct RunOptions {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<int> workers;
  /// Set by the sweep verb: run only this axis.
  std::optional<SweepAxis> axis;
  std::string verb = "run";
};

struct RunResult {
  std::vector<PointResult> points;
  std::string reports;
  std::string plot;
  std::string summary;
  int violated = 0;
  int failures = 0;
  int exit_status = 0;
};

/// Applies flag overrides and the seed rule; throws Error(invalid_config).
CaseConfig resolve(CaseConfig cfg, const RunOptions& options);

/// Sweep points in row order: the cartesian product of the selected axes.
std::vector<std::map<SweepAxis, double>> sweep_points(const CaseConfig& cfg,
                                                      std::optional<SweepAxis> axis);

PointResult run_point(const CaseConfig& cfg, int index, const std::map<SweepAxis, double>& point);

/// Runs all points on a bounded worker pool and renders the outputs.
RunResult execute(const CaseConfig& cfg, const RunOptions& options);

std::string render_reports(const CaseConfig& cfg, const std::vector<PointResult>& points);
std::string render_plot(const std::vector<PointResult>& points);
std::string render_summary(const CaseConfig& cfg, const std::vector<PointResult>& points,
                           int exit_status);

/// Writes via a temporary file and rename.
void write_atomic(const std::string& path, const std::string& content);

/// The run and sweep verbs end to end. Returns the exit status: 0 clean, 1 a
/// violated inequality, 2 invalid configuration.
int run_command(const std::string& config_path, const RunOptions& options, std::ostream& out,
                std::ostream& err);

struct CaseListing {
  std::string file;
  std::string id;
  std::string description;
  std::string checks;
};

std::vector<CaseListing> list_cases(const std::string& dir);

}  // namespace subspec
