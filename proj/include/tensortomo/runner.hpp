#pragma once

#include "tensortomo/config.hpp"

#include <ostream>
#include <string>

namespace tensortomo {

/// Process exit codes of a run.
enum ExitCode : int { Success = 0, ConfigError = 2, CertificationError = 3, NumericalError = 4 };

/// Runs one experiment, writing manifest.txt and its CSV / FIELD outputs into
/// out_dir (created if needed). Errors are reported on `log` and mapped to an
/// exit code; nothing is thrown.
int run(const ExperimentConfig& config, const std::string& out_dir, std::ostream& log);

/// Stem shared by the output files: experiment, metric, h, fan and seed.
std::string output_tag(const ExperimentConfig& config);

}  // namespace tensortomo
