#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cfn/autodiff.hpp"

namespace cfn {

struct GradCheckSuiteOptions {
    std::size_t points = 100;
    double eps = 1e-5;
    double tolerance = 1e-4;
    // Negates the backward rule of one op in every check (negative control).
    std::optional<ad::Op> inject_fault;
    std::uint64_t seed = 0;
};

struct GradCheckEntry {
    std::string name;
    std::size_t points = 0;
    double max_error = 0.0;
    bool passed = false;
};

struct GradCheckReport {
    double tolerance = 0.0;
    std::vector<GradCheckEntry> entries;

    bool passed() const;
};

// Names of the checks run by the suite: one per differentiable op plus the
// composite losses, the fusion pipeline under each rule, and a small
// end-to-end network.
std::vector<std::string> gradcheck_names();

// Each check evaluates its function at `points` random inputs kept away from
// the kinks of relu, clamp and max.
GradCheckReport run_gradcheck_suite(const GradCheckSuiteOptions& options = {});

void write_gradcheck_report(const GradCheckReport& r, std::ostream& out);
nlohmann::json gradcheck_report_to_json(const GradCheckReport& r);

}  // namespace cfn
