#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cfn/data.hpp"
#include "cfn/gradcheck_suite.hpp"
#include "cfn/metrics.hpp"
#include "cfn/model.hpp"
#include "cfn/stats.hpp"

namespace cfn {

// Everything a command may need. Loaded from --config (unknown keys are
// rejected), then overridden by command-line flags. The single seed drives
// generation, splitting and training.
struct RunConfig {
    std::uint64_t seed = 7;
    std::filesystem::path out = "out";
    std::size_t jobs = 1;
    std::optional<std::filesystem::path> dataset;
    SynthConfig synth;
    CooccurrenceOptions stats;
    SplitSpec splits;
    TrainConfig train;
    GradCheckSuiteOptions gradcheck;
    EvalOptions eval;
    std::vector<Variant> variants = all_variants();
    std::vector<std::uint64_t> ablate_seeds;  // empty: just `seed`
};

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json run_config_to_json(const RunConfig& c);

// Runs the `cfn` command line. `args` excludes the program name. Returns the
// process exit code: 0 success, 1 internal or numeric failure, 2 bad input.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

}  // namespace cfn
