// Command-line entry point: wires the scenario catalog to the classification,
// integration, saturation and measure machinery, emitting deterministic JSON
// and CSV artifacts plus optional static SVG plots.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "filippov/classify.hpp"
#include "filippov/errors.hpp"
#include "filippov/expr.hpp"
#include "filippov/flow.hpp"
#include "filippov/json_writer.hpp"
#include "filippov/measure.hpp"
#include "filippov/parallel.hpp"
#include "filippov/saturation.hpp"
#include "filippov/scenarios.hpp"
#include "filippov/svg.hpp"

namespace fp = filippov;

namespace {

constexpr int kSchemaVersion = 1;

std::string timestamp_utc() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_text(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw fp::Error("io-error", "cannot write '" + path + "'");
    out << content;
}

fp::JsonValue base_document(const std::string& command, fp::JsonValue config) {
    fp::JsonValue doc = fp::JsonValue::object();
    doc.set("schema_version", kSchemaVersion);
    doc.set("command", command);
    doc.set("config", std::move(config));
    doc.set("timestamp", timestamp_utc());
    return doc;
}

fp::JsonValue point_json(const fp::Point& p) {
    fp::JsonValue v = fp::JsonValue::array();
    v.push(fp::JsonValue::number(p.x));
    v.push(fp::JsonValue::number(p.y));
    return v;
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stod(item));
    return out;
}

fp::Rect parse_box(const std::string& text) {
    std::vector<double> v = parse_number_list(text);
    if (v.size() != 4)
        throw fp::UsageError("--box expects x0,y0,x1,y1 (got '" + text + "')");
    return fp::Rect{v[0], v[1], v[2], v[3]};
}

std::string slurp(const std::string& ref, const char* what) {
    if (!ref.empty() && ref.front() == '{') return ref;
    std::ifstream in(ref);
    if (!in) throw fp::Error("io-error", std::string("cannot read ") + what + " '" + ref + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<fp::NamedBox> load_sets(const std::string& ref) {
    nlohmann::json j = nlohmann::json::parse(slurp(ref, "sets file"));
    std::vector<fp::NamedBox> sets;
    for (const auto& item : j.at("sets")) {
        fp::NamedBox nb;
        nb.id = item.at("id").get<std::string>();
        auto box = item.at("box");
        nb.box = fp::Rect{box.at(0).get<double>(), box.at(1).get<double>(),
                          box.at(2).get<double>(), box.at(3).get<double>()};
        sets.push_back(std::move(nb));
    }
    return sets;
}

fp::StripedSpec load_striped_spec(const std::string& ref) {
    nlohmann::json j = nlohmann::json::parse(slurp(ref, "stripes file"));
    fp::StripedSpec spec;
    spec.mode = fp::domain_mode_from_string(j.value("mode", std::string("torus")));
    for (double v : j.at("b")) spec.b.push_back(v);
    spec.n = static_cast<int>(spec.b.size());
    if (j.contains("a"))
        for (double v : j.at("a")) spec.a.push_back(v);
    else
        spec.a.assign(spec.n, 0.0);
    if (j.contains("heights"))
        for (double v : j.at("heights")) spec.heights.push_back(v);
    else
        for (int i = 1; i <= spec.n; ++i)
            spec.heights.push_back(static_cast<double>(i) / spec.n);
    return spec;
}

// Reconstructs a stripe spec from a loaded piecewise-constant system with
// horizontal switching circles; used by --density-from-prop41.
fp::StripedSpec infer_striped_spec(const fp::PiecewiseSystem& sys) {
    const fp::QuotientDomain& d = sys.domain;
    if (!d.is_quotient())
        throw fp::ScenarioError("stripe densities require a torus or klein domain");
    std::vector<double> tops;
    for (std::size_t j = 0; j < sys.surfaces.size(); ++j) {
        fp::Vec2 g0 = sys.surfaces[j].gradient({d.x0 + 0.3 * d.p, d.y0 + 0.4 * d.q});
        if (std::fabs(g0.x) > 1e-12) continue;  // vertical seam (Klein)
        fp::Point pt = fp::surface_point(sys, static_cast<int>(j), fp::ParamAxis::X,
                                         d.x0 + 0.5 * d.p, d.y0 + 0.5 * d.q);
        double rel = (pt.y - d.y0) / d.q;
        tops.push_back(rel <= 1e-12 ? 1.0 : rel);  // wrap circle counts as the top
    }
    std::sort(tops.begin(), tops.end());
    fp::StripedSpec spec;
    spec.mode = d.mode;
    spec.n = static_cast<int>(tops.size());
    spec.heights = tops;
    spec.a.resize(spec.n);
    spec.b.resize(spec.n);
    for (int i = 0; i < spec.n; ++i) {
        double lo = i == spec.n - 1 ? 0.0 : spec.heights[i];
        double hi = i == spec.n - 1 ? spec.heights[0] : spec.heights[i + 1];
        fp::Point pt{d.x0 + 0.37 * d.p, d.y0 + 0.5 * (lo + hi) * d.q};
        fp::Vec2 f = sys.active_piece(pt).eval(pt);
        spec.a[i] = f.x;
        spec.b[i] = f.y;
    }
    return spec;
}

fp::PiecewiseSystem apply_prop41_densities(const fp::PiecewiseSystem& sys) {
    fp::StripedSpec spec = infer_striped_spec(sys);
    fp::StripedDensitySolution sol = fp::solve_striped_density(spec);
    if (!sol.feasible)
        throw fp::ScenarioError("no balance density exists: " + sol.reason);
    fp::PiecewiseSystem out = sys;
    const fp::QuotientDomain& d = sys.domain;
    for (auto& pc : out.pieces) {
        for (int i = 0; i < spec.n; ++i) {
            double lo = i == spec.n - 1 ? 0.0 : spec.heights[i];
            double hi = i == spec.n - 1 ? spec.heights[0] : spec.heights[i + 1];
            fp::Point pt{d.x0 + 0.37 * d.p, d.y0 + 0.5 * (lo + hi) * d.q};
            if (pc.matches(sys.signs_at(pt))) {
                pc.density = fp::Expr::number(sol.alpha[i]);
                break;
            }
        }
    }
    return out;
}

void draw_system_background(fp::SvgCanvas& svg, const fp::PiecewiseSystem& sys) {
    for (std::size_t j = 0; j < sys.surfaces.size(); ++j) {
        fp::SurfaceScan scan = fp::scan_surface(sys, static_cast<int>(j), 128);
        std::vector<fp::Point> pts;
        for (const auto& [param, pt] : scan.points) pts.push_back(pt);
        svg.polyline(pts, "#555555", 1.0);
    }
    svg.frame();
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_catalog(const std::string& out, const std::string& export_dir) {
    fp::JsonValue config = fp::JsonValue::object();
    config.set("export", export_dir);
    fp::JsonValue doc = base_document("catalog", std::move(config));
    fp::JsonValue list = fp::JsonValue::array();
    for (const auto& e : fp::scenario_catalog()) {
        fp::PiecewiseSystem sys = fp::get_scenario(e.name);
        fp::JsonValue item = fp::JsonValue::object();
        item.set("name", e.name);
        item.set("description", e.description);
        item.set("mode", fp::to_string(sys.domain.mode));
        item.set("surfaces", static_cast<int>(sys.surface_count()));
        item.set("pieces", static_cast<int>(sys.piece_count()));
        list.push(std::move(item));
        if (!export_dir.empty()) {
            std::ofstream f(export_dir + "/" + e.name + ".scn", std::ios::binary);
            if (!f) throw fp::Error("io-error", "cannot write scenario export");
            f << e.text;
        }
    }
    doc.set("entries", std::move(list));
    write_text(out, doc.dump());
    return 0;
}

int cmd_classify(const std::string& scenario, int surface, int samples,
                 const std::string& out, const std::string& json_out,
                 const std::string& svg_out) {
    fp::PiecewiseSystem sys = fp::load_scenario_by_name_or_path(scenario);
    fp::SurfaceScan scan = fp::scan_surface(sys, surface, samples);

    std::string csv = "param,x,y,f_plus_h,f_minus_h,label\n";
    for (const auto& [param, pt] : scan.points) {
        fp::SigmaClass cls = fp::classify_point(sys, surface, pt);
        csv += fp::format_double(param) + "," + fp::format_double(pt.x) + "," +
               fp::format_double(pt.y) + "," + fp::format_double(cls.f_plus_h) + "," +
               fp::format_double(cls.f_minus_h) + "," + fp::to_string(cls.label) + "\n";
    }
    write_text(out, csv);

    if (!json_out.empty()) {
        fp::JsonValue config = fp::JsonValue::object();
        config.set("scenario", scenario);
        config.set("surface", surface);
        config.set("samples", samples);
        fp::JsonValue doc = base_document("classify", std::move(config));
        fp::JsonValue intervals = fp::JsonValue::array();
        for (const auto& iv : scan.intervals) {
            fp::JsonValue item = fp::JsonValue::object();
            item.set("param0", iv.param0);
            item.set("param1", iv.param1);
            item.set("label", fp::to_string(iv.label));
            intervals.push(std::move(item));
        }
        doc.set("intervals", std::move(intervals));
        fp::JsonValue tangencies = fp::JsonValue::array();
        for (const auto& tp : scan.tangencies) {
            fp::JsonValue item = fp::JsonValue::object();
            item.set("param", tp.param);
            item.set("point", point_json(tp.pt));
            fp::JsonValue sides = fp::JsonValue::array();
            for (const auto& ts : tp.cls.tangency) {
                fp::JsonValue sv = fp::JsonValue::object();
                sv.set("side", ts.side);
                sv.set("order", ts.order);
                sv.set("visibility",
                       ts.visibility == fp::Visibility::Visible ? "visible" : "invisible");
                sides.push(std::move(sv));
            }
            item.set("sides", std::move(sides));
            tangencies.push(std::move(item));
        }
        doc.set("tangencies", std::move(tangencies));
        write_text(json_out, doc.dump());
    }

    if (!svg_out.empty()) {
        fp::SvgCanvas svg(scan.param0, 0.0, scan.param1, 0.2, 720);
        for (const auto& iv : scan.intervals) {
            std::string color = iv.label == fp::SigmaLabel::Crossing   ? "#4daf4a"
                                : iv.label == fp::SigmaLabel::Sliding  ? "#377eb8"
                                : iv.label == fp::SigmaLabel::Escaping ? "#e41a1c"
                                                                       : "#999999";
            svg.fill_rect(iv.param0, 0.0, iv.param1, 0.2, color, 0.8);
        }
        for (const auto& tp : scan.tangencies) svg.circle({tp.param, 0.1}, 4.0, "#000000");
        svg.frame();
        write_text(svg_out, svg.finish());
    }
    return 0;
}

int cmd_integrate(const std::string& scenario, const std::string& start_text, double time,
                  const std::string& policy, int cap, double tol, const std::string& out,
                  const std::string& json_out, const std::string& svg_out) {
    fp::PiecewiseSystem sys = fp::load_scenario_by_name_or_path(scenario);
    std::vector<double> sv = parse_number_list(start_text);
    if (sv.size() != 2) throw fp::UsageError("--start expects x,y");
    fp::FlowOptions opt;
    opt.tol = tol;
    opt.branch_cap = cap;
    opt.policy = policy == "all" ? fp::FlowPolicy::AllBranches : fp::FlowPolicy::Deterministic;
    fp::BranchTree tree = fp::flow_point(sys, {sv[0], sv[1]}, time, opt);

    std::string csv = "t,x,y,mode,branch_id\n";
    for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
        const fp::Arc& arc = tree.nodes[n].arc;
        for (const auto& s : arc.samples)
            csv += fp::format_double(s.t) + "," + fp::format_double(s.p.x) + "," +
                   fp::format_double(s.p.y) + "," +
                   (arc.mode == fp::ArcMode::Free ? "free" : "sliding") + "," +
                   std::to_string(n) + "\n";
    }
    write_text(out, csv);

    if (!json_out.empty()) {
        fp::JsonValue config = fp::JsonValue::object();
        config.set("scenario", scenario);
        config.set("start", start_text);
        config.set("time", time);
        config.set("policy", policy);
        config.set("cap", cap);
        config.set("tol", tol);
        fp::JsonValue doc = base_document("integrate", std::move(config));
        doc.set("nodes", static_cast<int>(tree.nodes.size()));
        doc.set("truncated", tree.truncated);
        fp::JsonValue leaves = fp::JsonValue::array();
        for (int leaf : tree.leaf_indices()) {
            fp::JsonValue item = fp::JsonValue::object();
            item.set("node", leaf);
            item.set("end", fp::to_string(tree.nodes[leaf].arc.end));
            item.set("t", tree.nodes[leaf].arc.t_end());
            item.set("point", point_json(tree.nodes[leaf].arc.p_end()));
            leaves.push(std::move(item));
        }
        doc.set("leaves", std::move(leaves));
        write_text(json_out, doc.dump());
    }

    if (!svg_out.empty()) {
        const fp::QuotientDomain& d = sys.domain;
        fp::SvgCanvas svg(d.x0, d.y0, d.x1(), d.y1());
        draw_system_background(svg, sys);
        for (const auto& node : tree.nodes) {
            std::vector<fp::Point> pts;
            for (const auto& s : node.arc.samples) pts.push_back(s.p);
            svg.polyline(pts, node.arc.mode == fp::ArcMode::Free ? "#377eb8" : "#e41a1c", 1.5);
        }
        write_text(svg_out, svg.finish());
    }
    return 0;
}

int cmd_flowset(const std::string& scenario, const std::vector<std::string>& box_texts,
                double time, int res, int cap, const std::string& out,
                const std::string& svg_out) {
    fp::PiecewiseSystem sys = fp::load_scenario_by_name_or_path(scenario);
    std::vector<fp::Rect> boxes;
    for (const auto& b : box_texts) boxes.push_back(parse_box(b));
    if (boxes.empty()) throw fp::UsageError("at least one --box is required");
    fp::FlowOptions opt;
    opt.branch_cap = cap;
    fp::FlowSetResult fsr = fp::flow_set(sys, boxes, time, res, opt);

    fp::JsonValue config = fp::JsonValue::object();
    config.set("scenario", scenario);
    fp::JsonValue jboxes = fp::JsonValue::array();
    for (const auto& b : box_texts) jboxes.push(fp::JsonValue::str(b));
    config.set("boxes", std::move(jboxes));
    config.set("time", time);
    config.set("res", res);
    config.set("cap", cap);
    fp::JsonValue doc = base_document("flowset", std::move(config));
    doc.set("cover_area", fsr.cover_area);
    doc.set("cover_boxes", static_cast<int>(fsr.cover.size()));
    doc.set("branch_cap_hit", fsr.branch_cap_hit);
    double input_area = 0.0;
    for (const auto& b : boxes) input_area += b.area();
    doc.set("input_area", input_area);
    fp::JsonValue cover = fp::JsonValue::array();
    for (const auto& r : fsr.cover) {
        fp::JsonValue item = fp::JsonValue::array();
        item.push(fp::JsonValue::number(r.x0));
        item.push(fp::JsonValue::number(r.y0));
        item.push(fp::JsonValue::number(r.x1));
        item.push(fp::JsonValue::number(r.y1));
        cover.push(std::move(item));
    }
    doc.set("cover", std::move(cover));
    write_text(out, doc.dump());

    if (!svg_out.empty()) {
        const fp::QuotientDomain& d = sys.domain;
        fp::SvgCanvas svg(d.x0, d.y0, d.x1(), d.y1());
        for (const auto& b : boxes) svg.fill_rect(b.x0, b.y0, b.x1, b.y1, "#4daf4a", 0.4);
        for (const auto& r : fsr.cover) svg.fill_rect(r.x0, r.y0, r.x1, r.y1, "#377eb8", 0.5);
        draw_system_background(svg, sys);
        write_text(svg_out, svg.finish());
    }
    return 0;
}

int cmd_satnz(const std::string& scenario, const std::string& grid_text, double horizon,
              int cap, const std::string& out, const std::string& svg_out) {
    fp::PiecewiseSystem sys = fp::load_scenario_by_name_or_path(scenario);
    int nx = 0, ny = 0;
    if (std::sscanf(grid_text.c_str(), "%dx%d", &nx, &ny) != 2 || nx < 1 || ny < 1)
        throw fp::UsageError("--grid expects NXxNY, e.g. 96x96");
    fp::SaturationOptions sopt;
    sopt.branch_cap = cap;
    fp::SaturationGrid grid = fp::estimate_saturation(sys, nx, ny, horizon, sopt);

    fp::JsonValue config = fp::JsonValue::object();
    config.set("scenario", scenario);
    config.set("grid", grid_text);
    config.set("horizon", horizon);
    config.set("cap", cap);
    fp::JsonValue doc = base_document("satnz", std::move(config));
    doc.set("estimate", "grid indicator at finite horizon");
    doc.set("fraction", grid.fraction);
    doc.set("insat_cells", static_cast<int>(grid.witnesses.size()));
    doc.set("undecided_cells", grid.undecided);
    fp::JsonValue rows = fp::JsonValue::array();
    for (int iy = ny - 1; iy >= 0; --iy) {
        std::string row;
        for (int ix = 0; ix < nx; ++ix) {
            fp::CellFlag f = grid.at(ix, iy);
            row += f == fp::CellFlag::InSat ? '1' : (f == fp::CellFlag::Undecided ? '?' : '0');
        }
        rows.push(fp::JsonValue::str(row));
    }
    doc.set("cells", std::move(rows));
    write_text(out, doc.dump());

    if (!svg_out.empty()) {
        const fp::QuotientDomain& d = sys.domain;
        fp::SvgCanvas svg(d.x0, d.y0, d.x1(), d.y1());
        double wx = d.p / nx, wy = d.q / ny;
        for (int ix = 0; ix < nx; ++ix)
            for (int iy = 0; iy < ny; ++iy) {
                fp::CellFlag f = grid.at(ix, iy);
                if (f == fp::CellFlag::NotInSat) continue;
                std::string color = f == fp::CellFlag::InSat ? fp::heat_color(1.0) : "#bbbbbb";
                svg.fill_rect(d.x0 + ix * wx, d.y0 + iy * wy, d.x0 + (ix + 1) * wx,
                              d.y0 + (iy + 1) * wy, color, 0.9);
            }
        draw_system_background(svg, sys);
        write_text(svg_out, svg.finish());
    }
    return 0;
}

int cmd_check_measure(const std::string& scenario, bool density_from_prop41,
                      const std::string& sets_ref, const std::string& times_text, int res,
                      int flux_samples, const std::string& out) {
    fp::PiecewiseSystem sys = fp::load_scenario_by_name_or_path(scenario);
    if (density_from_prop41) sys = apply_prop41_densities(sys);
    std::vector<fp::NamedBox> sets;
    if (!sets_ref.empty()) sets = load_sets(sets_ref);
    std::vector<double> times = parse_number_list(times_text);
    fp::MeasureReport rep = fp::check_measure(sys, sets, times, res, flux_samples);

    fp::JsonValue config = fp::JsonValue::object();
    config.set("scenario", scenario);
    config.set("density_from_prop41", density_from_prop41);
    config.set("sets", sets_ref);
    config.set("times", times_text);
    config.set("res", res);
    config.set("flux_samples", flux_samples);
    fp::JsonValue doc = base_document("check-measure", std::move(config));

    fp::JsonValue flux = fp::JsonValue::array();
    for (const auto& f : rep.flux) {
        fp::JsonValue item = fp::JsonValue::object();
        item.set("surface", f.surface);
        item.set("max_abs_residual", f.max_abs_residual);
        item.set("witness_param", f.witness_param);
        item.set("witness", point_json(f.witness));
        item.set("violation", f.violation);
        flux.push(std::move(item));
    }
    doc.set("flux", std::move(flux));

    fp::JsonValue divergence = fp::JsonValue::array();
    for (const auto& dv : rep.divergence) {
        fp::JsonValue item = fp::JsonValue::object();
        item.set("piece", dv.piece);
        item.set("max_abs", dv.max_abs);
        item.set("witness", point_json(dv.witness));
        item.set("violation", dv.violation);
        divergence.push(std::move(item));
    }
    doc.set("divergence", std::move(divergence));

    fp::JsonValue push = fp::JsonValue::array();
    for (const auto& p : rep.pushforward) {
        fp::JsonValue item = fp::JsonValue::object();
        item.set("set", p.set_id);
        item.set("time", p.time);
        item.set("nu_ref", p.nu_ref);
        item.set("nu_image", p.nu_image);
        item.set("relative_error", p.relative_error);
        item.set("cover_area", p.cover_area);
        item.set("cover_nu", p.cover_nu);
        item.set("branched", p.branched);
        item.set("cap_hit", p.cap_hit);
        push.push(std::move(item));
    }
    doc.set("pushforward", std::move(push));

    doc.set("verdict", rep.verdict == fp::MeasureVerdict::ConsistentWithInvariance
                           ? "consistent-with-invariance"
                           : "violation-detected");
    doc.set("witness", rep.witness);
    write_text(out, doc.dump());
    return 0;
}

int cmd_density_solve(const std::string& stripes_ref, const std::string& out) {
    fp::StripedSpec spec = load_striped_spec(stripes_ref);
    fp::StripedDensitySolution sol = fp::solve_striped_density(spec);

    fp::JsonValue config = fp::JsonValue::object();
    config.set("stripes", stripes_ref);
    fp::JsonValue doc = base_document("density-solve", std::move(config));
    doc.set("mode", fp::to_string(spec.mode));
    doc.set("n", spec.n);
    doc.set("feasible", sol.feasible);
    doc.set("reason", sol.reason);
    doc.set("residual", sol.residual);
    fp::JsonValue alpha = fp::JsonValue::array();
    for (double v : sol.alpha) alpha.push(fp::JsonValue::number(v));
    doc.set("alpha", std::move(alpha));
    write_text(out, doc.dump());
    return 0;
}

int cmd_return_map(const std::string& scenario, const std::string& point_text,
                   const std::string& offsets_text, const std::string& out) {
    fp::PiecewiseSystem sys = fp::load_scenario_by_name_or_path(scenario);
    std::vector<double> pv = parse_number_list(point_text);
    if (pv.size() != 2) throw fp::UsageError("--point expects x,y");
    std::vector<double> offsets = parse_number_list(offsets_text);
    if (offsets.empty()) throw fp::UsageError("--offsets expects a comma list");
    fp::ReturnMapResult rm = fp::return_map(sys, {pv[0], pv[1]}, offsets);

    fp::JsonValue config = fp::JsonValue::object();
    config.set("scenario", scenario);
    config.set("point", point_text);
    config.set("offsets", offsets_text);
    fp::JsonValue doc = base_document("return-map", std::move(config));
    doc.set("tangency", point_json(rm.tangency));
    fp::JsonValue pairs = fp::JsonValue::array();
    for (std::size_t i = 0; i < rm.offsets.size(); ++i) {
        fp::JsonValue item = fp::JsonValue::object();
        item.set("s", rm.offsets[i]);
        item.set("s_return", rm.returned[i]);
        pairs.push(std::move(item));
    }
    doc.set("map", std::move(pairs));
    doc.set("max_error", rm.max_error);
    doc.set("center", rm.center);
    write_text(out, doc.dump());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Filippov piecewise-smooth vector field toolkit"};
    app.require_subcommand(1);

    std::string scenario, out, json_out, svg_out, export_dir;
    std::string start_text, grid_text = "64x64", times_text, sets_ref, stripes_ref;
    std::string policy = "det", point_text, offsets_text;
    std::vector<std::string> boxes;
    int surface = 0, samples = 64, cap = 64, res = 8, flux_samples = 256;
    double time = 1.0, horizon = 2.0, tol = 1e-9;
    bool density_prop41 = false;

    auto* c_catalog = app.add_subcommand("catalog", "list built-in scenarios");
    c_catalog->add_option("--out", out, "output JSON path (default stdout)");
    c_catalog->add_option("--export", export_dir, "write scenarios/*.scn into a directory");

    auto* c_classify = app.add_subcommand("classify", "label points of a switching surface");
    c_classify->add_option("--scenario", scenario)->required();
    c_classify->add_option("--surface", surface);
    c_classify->add_option("--samples", samples);
    c_classify->add_option("--out", out, "CSV path (default stdout)");
    c_classify->add_option("--json", json_out, "JSON report path");
    c_classify->add_option("--svg", svg_out, "classification strip SVG");

    auto* c_integrate = app.add_subcommand("integrate", "flow a point, tracking branches");
    c_integrate->add_option("--scenario", scenario)->required();
    c_integrate->add_option("--start", start_text)->required();
    c_integrate->add_option("--time", time)->required();
    c_integrate->add_option("--policy", policy)->check(CLI::IsMember({"det", "all"}));
    c_integrate->add_option("--cap", cap);
    c_integrate->add_option("--tol", tol)->check(CLI::Range(1e-14, 1.0));
    c_integrate->add_option("--out", out, "trajectory CSV path (default stdout)");
    c_integrate->add_option("--json", json_out, "JSON report path");
    c_integrate->add_option("--svg", svg_out, "phase portrait SVG");

    auto* c_flowset = app.add_subcommand("flowset", "outer cover of the set-valued flow");
    c_flowset->add_option("--scenario", scenario)->required();
    c_flowset->add_option("--box", boxes, "x0,y0,x1,y1 (repeatable)")->required();
    c_flowset->add_option("--time", time)->required();
    c_flowset->add_option("--res", res, "samples per box edge");
    c_flowset->add_option("--cap", cap);
    c_flowset->add_option("--out", out, "JSON path (default stdout)");
    c_flowset->add_option("--svg", svg_out);

    auto* c_satnz = app.add_subcommand("satnz", "grid estimate of the saturation of N_Z");
    c_satnz->add_option("--scenario", scenario)->required();
    c_satnz->add_option("--grid", grid_text, "NXxNY");
    c_satnz->add_option("--horizon", horizon)->required();
    c_satnz->add_option("--cap", cap);
    c_satnz->add_option("--out", out, "JSON path (default stdout)");
    c_satnz->add_option("--svg", svg_out, "heat map SVG");

    auto* c_measure = app.add_subcommand("check-measure", "flux/divergence/push-forward checks");
    c_measure->add_option("--scenario", scenario)->required();
    c_measure->add_flag("--density-from-prop41", density_prop41,
                        "solve stripe balance densities and attach them first");
    c_measure->add_option("--sets", sets_ref, "sets JSON (path or inline)");
    c_measure->add_option("--times", times_text, "comma list of times");
    c_measure->add_option("--res", res, "samples per box edge");
    c_measure->add_option("--flux-samples", flux_samples);
    c_measure->add_option("--out", out, "JSON path (default stdout)");

    auto* c_density = app.add_subcommand("density-solve", "stripe balance densities");
    c_density->add_option("--stripes", stripes_ref, "spec JSON (path or inline)")->required();
    c_density->add_option("--out", out, "JSON path (default stdout)");

    auto* c_return = app.add_subcommand("return-map", "first-return map at a fold-fold");
    c_return->add_option("--scenario", scenario)->required();
    c_return->add_option("--point", point_text, "tangency point x,y")->required();
    c_return->add_option("--offsets", offsets_text)->required();
    c_return->add_option("--out", out, "JSON path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (c_catalog->parsed()) return cmd_catalog(out, export_dir);
        if (c_classify->parsed())
            return cmd_classify(scenario, surface, samples, out, json_out, svg_out);
        if (c_integrate->parsed())
            return cmd_integrate(scenario, start_text, time, policy, cap, tol, out,
                                 json_out, svg_out);
        if (c_flowset->parsed())
            return cmd_flowset(scenario, boxes, time, res, cap, out, svg_out);
        if (c_satnz->parsed())
            return cmd_satnz(scenario, grid_text, horizon, cap, out, svg_out);
        if (c_measure->parsed())
            return cmd_check_measure(scenario, density_prop41, sets_ref, times_text, res,
                                     flux_samples, out);
        if (c_density->parsed()) return cmd_density_solve(stripes_ref, out);
        if (c_return->parsed())
            return cmd_return_map(scenario, point_text, offsets_text, out);
        return 2;
    } catch (const fp::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const fp::Error& e) {
        fp::JsonValue err = fp::JsonValue::object();
        err.set("schema_version", kSchemaVersion);
        fp::JsonValue detail = fp::JsonValue::object();
        detail.set("kind", e.kind());
        detail.set("message", e.what());
        err.set("error", std::move(detail));
        std::cout << err.dump();
        return 1;
    } catch (const std::exception& e) {
        fp::JsonValue err = fp::JsonValue::object();
        err.set("schema_version", kSchemaVersion);
        fp::JsonValue detail = fp::JsonValue::object();
        detail.set("kind", "internal-error");
        detail.set("message", e.what());
        err.set("error", std::move(detail));
        std::cout << err.dump();
        return 1;
    }
}
