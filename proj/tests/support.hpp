#pragma once

#include <string>

#include "subspec/config.hpp"

namespace testing {

inline std::string source_path(const std::string& rel) {
  return std::string(SUBSPEC_SOURCE_DIR) + "/" + rel;
}

inline subspec::CaseConfig bundled_config(const std::string& name) {
  return subspec::load_config(source_path("cases/" + name + ".case"));
}

inline subspec::SubmersionCase bundled(const std::string& name) {
  return bundled_config(name).base_case;
}

inline subspec::SubmersionCase line_case(double R, int n, subspec::WarpFunction warp) {
  using namespace subspec;
  SubmersionCase c;
  c.id = "line";
  c.base = WeightedInterval::uniform(-R, R);
  c.base.left.truncated = c.base.right.truncated = true;
  c.truncation = R;
  c.resolution = n;
  c.warp = std::move(warp);
  return c;
}

inline subspec::SubmersionCase interval_case(double a, double b, int n, subspec::WarpFunction warp) {
  using namespace subspec;
  SubmersionCase c;
  c.id = "interval";
  c.base = WeightedInterval::uniform(a, b);
  c.resolution = n;
  c.warp = std::move(warp);
  if (c.warp.family() == WarpFamily::constant) c.kind = SubmersionKind::product;
  return c;
}

inline subspec::SubmersionCase hyperbolic_case(int m, double R, int n) {
  using namespace subspec;
  SubmersionCase c;
  c.id = "hyperbolic";
  c.kind = SubmersionKind::product;
  c.base = WeightedInterval::hyperbolic(m, R);
  c.truncation = R;
  c.resolution = n;
  return c;
}

}  // namespace testing
