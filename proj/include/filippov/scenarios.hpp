#pragma once

// Built-in scenario catalog: the classic two-zone prototypes, the torus and
// Klein-bottle stripe systems, and the example systems exercised by the
// integration and acceptance suites. Entries are embedded as scenario text
// (same format as scenarios/*.scn) and loadable by name.

#include <string>
#include <vector>

#include "filippov/measure.hpp"
#include "filippov/system.hpp"

namespace filippov {

struct CatalogEntry {
    std::string name;
    std::string description;
    std::string text;
};

const std::vector<CatalogEntry>& scenario_catalog();

// Loads a catalog entry by name; throws Error("unknown-name", ...) otherwise.
PiecewiseSystem get_scenario(const std::string& name);

// Raw scenario text for a catalog entry.
const std::string& scenario_text(const std::string& name);

// Renders a stripe system as scenario text. When with_density is true the
// solved balance densities are attached to the pieces (the spec must be
// feasible).
std::string make_striped_scenario_text(const StripedSpec& spec, bool with_density);

// Resolves "--scenario" CLI arguments: catalog name or path to a .scn file.
PiecewiseSystem load_scenario_by_name_or_path(const std::string& ref);

}  // namespace filippov
