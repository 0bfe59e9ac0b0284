#include "filippov/scenarios.hpp"

#include <fstream>

#include "filippov/errors.hpp"

namespace filippov {

namespace {

const char* kZ1 = R"scn(meta { name = z1 }
domain { mode = plane; x0 = -4; y0 = -4; p = 8; q = 8 }
surface { h = "y" }
piece { signature = "+"; fx = "1"; fy = "-1" }
piece { signature = "-"; fx = "1"; fy = "1" }
)scn";

const char* kZ2AsPrinted = R"scn(meta { name = z2_as_printed }
domain { mode = plane; x0 = -4; y0 = -4; p = 8; q = 8 }
surface { h = "y" }
piece { signature = "+"; fx = "1"; fy = "-1" }
piece { signature = "-"; fx = "-1"; fy = "1" }
)scn";

const char* kZ2Refractive = R"scn(meta { name = z2_refractive }
domain { mode = plane; x0 = -4; y0 = -4; p = 8; q = 8 }
surface { h = "y" }
piece { signature = "+"; fx = "1"; fy = "-1" }
piece { signature = "-"; fx = "-1"; fy = "-1" }
)scn";

const char* kFoldFoldCenter = R"scn(meta { name = foldfold_center }
domain { mode = plane; x0 = -1; y0 = -1; p = 2; q = 2 }
surface { h = "y" }
piece { signature = "+"; fx = "1"; fy = "-x" }
piece { signature = "-"; fx = "-1"; fy = "-x" }
)scn";

const char* kFoldFoldPerturbed = R"scn(meta { name = foldfold_perturbed }
domain { mode = plane; x0 = -1; y0 = -1; p = 2; q = 2 }
surface { h = "y" }
piece { signature = "+"; fx = "1"; fy = "-x" }
piece { signature = "-"; fx = "-1"; fy = "-x-x^2/10" }
)scn";

const char* kEx42 = R"scn(meta { name = ex42 }
domain { mode = torus; x0 = 0; y0 = 0; p = 1; q = 1 }
surface { h = "y" }
surface { h = "y-1/2" }
piece { signature = "+-"; fx = "0"; fy = "-1" }
piece { signature = "++"; fx = "0"; fy = "1" }
)scn";

const char* kEx43 = R"scn(meta { name = ex43 }
domain { mode = torus; x0 = 0; y0 = -3/2; p = pi; q = 9/2 }
surface { h = "y" }
surface { h = "y-3/2" }
piece { signature = "--"; fx = "1"; fy = "(y+2)*(y+1)*(3/5-sin(x)^2)" }
piece { signature = "+-"; fx = "1"; fy = "(y-2)*(y-1)*(-3/5+sin(x)^2)" }
piece { signature = "++"; fx = "1"; fy = "(y-5/2)*(y-7/2)*(3/5-sin(x)^2)" }
)scn";

const char* kEx44 = R"scn(meta { name = ex44 }
domain { mode = torus; x0 = -pi/2; y0 = -3*pi/2; p = 2*pi; q = 3*pi }
surface { h = "y" }
surface { h = "y+3*pi/2" }
piece { signature = "-+"; fx = "cos(x)*(-sqrt3*cos(y)+sin(y))"; fy = "-sin(x)*(cos(y)+sqrt3*sin(y))"; density = "sin(x)" }
piece { signature = "++"; fx = "0"; fy = "1"; density = "1" }
)scn";

// ex43 deformed so the two invariant circles become grazing cycles
// y = +/- (1/5)(3/5 - sin^2 x)^2 touching the lower surface at its two fold
// points; the continuity of the original system across the vertical wrap is
// lost, so the wrap circle joins the switching set.
const char* kEx43Perturbed = R"scn(meta { name = ex43_perturbed }
domain { mode = torus; x0 = 0; y0 = -3/2; p = pi; q = 9/2 }
surface { h = "y" }
surface { h = "y-3/2" }
surface { h = "y+3/2" }
piece { signature = "--+"; fx = "1"; fy = "(4/5)*(3/5-sin(x)^2)*sin(x)*cos(x)+(y+(1/5)*(3/5-sin(x)^2)^2)*(y+2)*(3/5-sin(x)^2)" }
piece { signature = "+-+"; fx = "1"; fy = "-(4/5)*(3/5-sin(x)^2)*sin(x)*cos(x)+(y-(1/5)*(3/5-sin(x)^2)^2)*(y-2)*(sin(x)^2-3/5)" }
piece { signature = "+++"; fx = "1"; fy = "(y-5/2)*(y-7/2)*(3/5-sin(x)^2)" }
)scn";

std::vector<CatalogEntry> build_catalog() {
    std::vector<CatalogEntry> entries = {
        {"z1", "two-zone plane field collapsing onto the switching line", kZ1},
        {"z2_as_printed", "two-zone plane field with zero sliding velocity", kZ2AsPrinted},
        {"z2_refractive", "area-preserving refractive variant of z2", kZ2Refractive},
        {"ex42", "vertical stripe field on the unit torus; saturation fills the torus",
         kEx42},
        {"ex43", "torus field with two limit cycles bounding the saturation band", kEx43},
        {"ex44", "torus field with a trigonometric lower piece and stated densities",
         kEx44},
        {"ex43_perturbed", "ex43 deformed so the bounding cycles graze the switching line",
         kEx43Perturbed},
        {"foldfold_center", "invisible fold-fold with zero-trace pieces (a center)",
         kFoldFoldCenter},
        {"foldfold_perturbed", "non-refractive perturbation of the fold-fold center",
         kFoldFoldPerturbed},
    };

    StripedSpec torus = StripedSpec::equal_heights(DomainMode::Torus,
                                                   {0.5, -0.25, 1.0}, {1.0, 2.0, 4.0});
    entries.push_back({"striped_torus",
                       "three-stripe torus field with solved balance densities",
                       make_striped_scenario_text(torus, true)});
    entries.push_back({"striped_torus_lebesgue",
                       "three-stripe torus field with unit density (not invariant)",
                       make_striped_scenario_text(torus, false)});

    StripedSpec klein = StripedSpec::equal_heights(DomainMode::KleinBottle,
                                                   {1.0, 2.0}, {1.0, 2.0});
    entries.push_back({"striped_klein",
                       "two-stripe Klein-bottle field satisfying the seam balance",
                       make_striped_scenario_text(klein, true)});
    return entries;
}

}  // namespace

const std::vector<CatalogEntry>& scenario_catalog() {
    static const std::vector<CatalogEntry> catalog = build_catalog();
    return catalog;
}

const std::string& scenario_text(const std::string& name) {
    for (const auto& e : scenario_catalog())
        if (e.name == name) return e.text;
    throw Error("unknown-name", "no scenario named '" + name + "' in the catalog");
}

PiecewiseSystem get_scenario(const std::string& name) {
    PiecewiseSystem sys = load_scenario(scenario_text(name));
    sys.name = name;
    return sys;
}

std::string make_striped_scenario_text(const StripedSpec& spec, bool with_density) {
    if (spec.mode == DomainMode::Plane)
        throw ScenarioError("stripe systems live on torus or klein domains");
    StripedDensitySolution sol;
    if (with_density) {
        sol = solve_striped_density(spec);
        if (!sol.feasible)
            throw ScenarioError("stripe spec admits no balance density: " + sol.reason);
    }

    int n = spec.n;
    std::string out;
    out += "meta { name = striped_";
    out += spec.mode == DomainMode::Torus ? "torus" : "klein";
    out += " }\n";
    out += "domain { mode = ";
    out += spec.mode == DomainMode::Torus ? "torus" : "klein";
    out += "; x0 = 0; y0 = 0; p = 1; q = 1 }\n";

    // Interior circles y = h_1 .. h_{n-1}, then the wrap circle y = 0; the
    // Klein bottle adds the vertical seam x = 0.
    for (int i = 0; i + 1 < n; ++i)
        out += "surface { h = \"y-" + format_double(spec.heights[i]) + "\" }\n";
    out += "surface { h = \"y\" }\n";
    bool klein = spec.mode == DomainMode::KleinBottle;
    if (klein) out += "surface { h = \"x\" }\n";

    auto signature_for = [&](int stripe /*1-based*/) {
        std::string sig;
        for (int j = 1; j <= n - 1; ++j)
            sig += (stripe <= n - 1 && j <= stripe) ? '+' : '-';
        sig += '+';              // wrap circle: canonical y >= 0
        if (klein) sig += '+';   // seam: canonical x >= 0
        return sig;
    };

    for (int k = 1; k <= n; ++k) {
        out += "piece { signature = \"" + signature_for(k) + "\"; fx = \"" +
               format_double(spec.a[k - 1]) + "\"; fy = \"" + format_double(spec.b[k - 1]) +
               "\"";
        if (with_density)
            out += "; density = \"" + format_double(sol.alpha[k - 1]) + "\"";
        out += " }\n";
    }
    return out;
}

PiecewiseSystem load_scenario_by_name_or_path(const std::string& ref) {
    for (const auto& e : scenario_catalog())
        if (e.name == ref) return get_scenario(ref);
    std::ifstream probe(ref);
    if (!probe)
        throw Error("unknown-name",
                    "'" + ref + "' is neither a catalog scenario nor a readable file");
    return load_scenario_file(ref);
}

}  // namespace filippov
