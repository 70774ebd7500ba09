#pragma once

#include <string>
#include <vector>

#include "config.hpp"

namespace s3 {

// The CLI surface: data generation, supernet training, space evolution,
// architecture search, evaluation, ablation, attention analysis and report
// assembly. Every command is a pure function of (config, artifacts on disk)
// and rewrites its outputs byte-identically on reruns.
const std::vector<std::string>& command_names();

// Runs one command; artifacts land under cfg.out_dir and the run manifest is
// updated. Throws ConfigError for unknown commands or invalid configs,
// IoError when a required upstream artifact is missing.
void run_command(const RunConfig& cfg, const std::string& command);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace s3
