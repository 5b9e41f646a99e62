#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tsfb/applications.hpp"

namespace tsfb {

// Named, ready-to-solve problem instances used by the command line tool and
// the test fixtures. The base triple is instantiated on the given lattice.
struct Preset {
    std::string name;
    std::string description;
    Dims dims;
    ProblemSpec spec;
    ControlTriple base;
    std::optional<LqSpec> lq;
    std::optional<ClassicalSpec> classical;
};

std::vector<std::string> preset_names();
Preset get_preset(const std::string& name, const TwoSidedLattice& lat);

}  // namespace tsfb
