#include <iostream>

#include "checks.hpp"

int main(int argc, char** argv)
{
    const std::string filter = argc > 1 ? argv[1] : "";
    const int failures = voxavoid::checks::run_checks(std::cout, VOXAVOID_DATA_DIR, filter);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
