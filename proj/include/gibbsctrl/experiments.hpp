#pragma once

#include <cstdint>
#include <string>

#include "gibbsctrl/config.hpp"

namespace gibbsctrl {

struct RunContext {
    std::string out_dir;
    uint64_t seed = 1;
    int threads = 0;  // 0: GIBBSCTRL_THREADS or hardware
};

// Batch experiment driver. Subcommands: solve, simulate, optimize, compare,
// limit-sweep, certify. Writes CSV artifacts (each stamped with the config
// hash and seed) plus the fully-resolved config into ctx.out_dir. Returns a
// process exit status; solver non-convergence leaves a residual trace file
// and returns nonzero.
int run_subcommand(const std::string& name, const ExperimentConfig& cfg,
                   const RunContext& ctx);

}  // namespace gibbsctrl
