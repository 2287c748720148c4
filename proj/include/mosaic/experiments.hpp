#pragma once

#include "mosaic/config.hpp"

#include <iosfwd>

namespace mosaic {

// Experiment drivers behind the CLI subcommands. Each one runs end to end
// under cfg's output directory and writes manifest.txt, the resolved
// config, and its artifact files. Returned exit codes: 0 success, 2 config
// error, 3 contract violation, 4 divergence (the CLI also maps the
// corresponding exceptions).

int run_gradcheck(const ExperimentConfig& cfg);
int run_moons_train(const ExperimentConfig& cfg);
int run_moons_eval(const ExperimentConfig& cfg);
int run_induction(const ExperimentConfig& cfg);
int run_icl_train(const ExperimentConfig& cfg);
int run_icl_eval(const ExperimentConfig& cfg);
int run_attn_profile(const ExperimentConfig& cfg);
int run_sweep(const ExperimentConfig& cfg);

// Aligned metric table of two manifests of the same kind.
int run_compare(const std::string& manifest_a, const std::string& manifest_b,
                std::ostream& os);

}  // namespace mosaic
