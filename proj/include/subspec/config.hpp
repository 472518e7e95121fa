#pragma once

// Flat key = value case configuration with dotted sections.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "subspec/verify.hpp"

namespace subspec {

enum class SweepAxis { R, n, a };

std::string_view to_string(SweepAxis axis);
std::optional<SweepAxis> parse_axis(std::string_view name);

struct SweepSpec {
  SweepAxis axis = SweepAxis::R;
  std::vector<double> values;
};

struct OutputSpec {
  std::string dir = "out";
  std::string reports = "reports.jsonl";
  std::string plot = "plot.tsv";
  std::string summary = "summary.txt";
  std::string header = "header.json";
};

struct CaseConfig {
  std::string source;
  std::string description;
  SubmersionCase base_case;
  /// Steps in execution order.
  std::vector<std::string> checks;
  VerifyOptions verify;
  std::optional<std::uint64_t> seed;
  /// Declared axes in the order R, n, a.
  std::vector<SweepSpec> sweeps;
  /// R-sweeps scale n to keep the grid spacing.
  bool fixed_spacing = true;
  int workers = 1;
  OutputSpec output;

  bool needs_seed() const;
  const SweepSpec* sweep(SweepAxis axis) const;
};

/// Every accepted check name, in canonical order.
const std::vector<std::string>& known_checks();
/// Every accepted key.
const std::vector<std::string>& known_keys();

/// Parses "pi", "0.5pi", "pi/2", "-inf" and plain decimals.
double parse_number(const std::string& text);

/// Throws Error(invalid_config) with "source:line: message".
CaseConfig parse_config(const std::string& text, const std::string& source = "<config>");
CaseConfig load_config(const std::string& path);

/// The case at one sweep point.
SubmersionCase apply_point(const CaseConfig& cfg, const std::map<SweepAxis, double>& point);

}  // namespace subspec
