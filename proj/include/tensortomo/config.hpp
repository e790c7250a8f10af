#pragma once

#include "tensortomo/manifold.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace tensortomo {

/// Every tunable of a run. Text form is flat "section.key = value" lines with
/// '#' comments; missing keys keep the defaults below.
struct ExperimentConfig {
  std::string experiment = "certify";

  // metric
  std::string metric_kind = "euclidean";   // euclidean | conformal | perturbed
  double conformal_amplitude = 0.1;
  double conformal_width = 1.0;
  double conformal_cx = 0.0;
  double conformal_cy = 0.0;
  double perturbation_eps = 0.05;
  double bump_c11 = 1.0;
  double bump_c12 = 0.5;
  double bump_c22 = -0.3;
  double bump_cx = 0.2;
  double bump_cy = -0.1;
  double bump_sigma = 0.6;

  // domain and sampling
  double radius_M = 1.0;
  double radius_M1 = 1.3;
  double h = 1.0 / 64.0;
  int fan_points = 64;
  int fan_dirs = 32;
  double step = 1e-3;

  // ensemble
  int ensemble_size = 50;
  std::uint64_t seed = 7;
  double band_limit = 8.0;
  int modes = 10;

  // batched normal operator
  int normal_fan_points = 512;
  int normal_fan_dirs = 128;
  int normal_n_theta = 128;
  double normal_map_step = 0.05;

  // forward
  std::string forward_field = "metric";    // metric | random | phantom

  // normal-crosscheck
  int crosscheck_grid = 5;
  double crosscheck_extent = 0.5;
  int crosscheck_dirs = 512;

  // symbol
  double symbol_width = 0.05;
  int symbol_angles = 8192;
  int symbol_directions = 16;
  bool symbol_order_probe = false;

  // boundary recovery
  int recovery_points = 128;
  double recovery_tilt = 0.7853981633974483;

  // stability
  bool stability_ratio_on_fs = true;
  bool stability_pipeline = false;

  // perturbation
  std::vector<double> perturbation_eps_list{0.02, 0.05, 0.1};
  int perturbation_test_size = 10;

  // reconstruct
  int cgls_max_iter = 200;
  double cgls_tol = 1e-3;
  double cgls_coarse_h = 0.125;
  double phantom_a = 8.0;
  double phantom_cx = 0.1;
  double phantom_cy = -0.05;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Registered experiment names.
const std::vector<std::string>& experiment_names();

/// Throws ParseError (with line number), UnknownKey or RangeError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Checks ranges and the experiment name; throws RangeError.
void validate(const ExperimentConfig& c);
/// Every key with its resolved value, 17 significant digits.
std::string serialize(const ExperimentConfig& c);

Metric make_metric(const ExperimentConfig& c);
std::shared_ptr<const Domain> make_domain(const ExperimentConfig& c);
TensorBump make_bump(const ExperimentConfig& c);

}  // namespace tensortomo
