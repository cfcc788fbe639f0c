#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace voxavoid::checks {

struct Outcome
{
    bool pass = false;
    std::string detail;
};

struct Check
{
    std::string name;
    std::function<Outcome(const std::filesystem::path& data_dir)> run;
};

/// One entry per acceptance criterion, in the order they are reported.
std::vector<Check> acceptance_checks();

/// Runs the checks whose name contains `filter` (all when empty), printing
/// one "PASS|FAIL name: detail (seconds)" line each. Returns the number of failures.
int run_checks(std::ostream& out, const std::filesystem::path& data_dir, const std::string& filter = {});

}  // namespace voxavoid::checks
