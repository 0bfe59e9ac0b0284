#include "filippov/system.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "filippov/errors.hpp"

namespace filippov {

std::vector<int> PiecewiseSystem::signs_at(const Point& canonical, double tol) const {
    std::vector<int> signs(surfaces.size(), 0);
    for (std::size_t j = 0; j < surfaces.size(); ++j) {
        double h = surfaces[j].eval(canonical);
        if (h > tol)
            signs[j] = 1;
        else if (h < -tol)
            signs[j] = -1;
    }
    return signs;
}

int PiecewiseSystem::active_piece_index(const Point& pt) const {
    Point c = domain.canonicalize(pt);
    std::vector<int> signs = signs_at(c);
    for (std::size_t j = 0; j < signs.size(); ++j) {
        if (signs[j] == 0)
            throw OnSurfaceError("point (" + format_double(c.x) + ", " + format_double(c.y) +
                                 ") lies on surface " + std::to_string(j));
    }
    int found = -1;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        if (pieces[i].matches(signs)) {
            if (found >= 0)
                throw ScenarioError("ambiguous piece signatures at sampled point");
            found = static_cast<int>(i);
        }
    }
    if (found < 0)
        throw ScenarioError("no piece covers sign combination at (" + format_double(c.x) +
                            ", " + format_double(c.y) + ")");
    return found;
}

int PiecewiseSystem::active_piece_index_hinted(const Point& canonical,
                                               const std::vector<int>& hint) const {
    std::vector<int> signs = signs_at(canonical);
    for (std::size_t j = 0; j < signs.size(); ++j)
        if (signs[j] == 0) signs[j] = hint.size() > j ? hint[j] : 1;
    for (std::size_t i = 0; i < pieces.size(); ++i)
        if (pieces[i].matches(signs)) return static_cast<int>(i);
    // Fall back to flipping ambiguous entries; a hint captured in another
    // stripe can be stale after a seam crossing.
    std::vector<int> raw = signs_at(canonical);
    for (std::size_t j = 0; j < raw.size(); ++j) {
        if (raw[j] != 0) continue;
        std::vector<int> alt = signs;
        alt[j] = -signs[j];
        for (std::size_t i = 0; i < pieces.size(); ++i)
            if (pieces[i].matches(alt)) return static_cast<int>(i);
    }
    throw ScenarioError("no piece covers sign combination near (" +
                        format_double(canonical.x) + ", " + format_double(canonical.y) + ")");
}

Vec2 PiecewiseSystem::field_at(const Point& pt) const {
    DeckTransform t = domain.canonical_chart(pt);
    Point c = domain.apply(t, pt);
    const SmoothPiece& pc = pieces[active_piece_index(c)];
    return domain.apply_vector(t, pc.eval(c));
}

Vec2 PiecewiseSystem::field_at_hinted(const Point& pt, const std::vector<int>& hint) const {
    DeckTransform t = domain.canonical_chart(pt);
    Point c = domain.apply(t, pt);
    const SmoothPiece& pc = pieces[active_piece_index_hinted(c, hint)];
    return domain.apply_vector(t, pc.eval(c));
}

SideView PiecewiseSystem::side_view(int surface, const Point& pt, int side) const {
    const SwitchingSurface& s = surfaces[surface];
    Point c0 = domain.canonicalize(pt);
    Vec2 g = s.gradient(c0);
    double gn = g.norm();
    if (gn < 1e-9)
        throw ScenarioError("degenerate gradient on surface " + std::to_string(surface));
    double eps = 1e-7;
    Point probe{c0.x + side * eps * g.x / gn, c0.y + side * eps * g.y / gn};
    DeckTransform t = domain.canonical_chart(probe);
    Point probe_c = domain.apply(t, probe);
    SideView view;
    view.chart = t;
    view.chart_point = domain.apply(t, c0);
    // The probe is strictly off surface `surface`; the hinted lookup only
    // guards against it grazing another surface.
    view.piece = active_piece_index_hinted(probe_c, std::vector<int>(surfaces.size(), 1));
    return view;
}

Vec2 PiecewiseSystem::sided_field(int surface, const Point& pt, int side) const {
    SideView v = side_view(surface, pt, side);
    return v.field(domain, pieces[v.piece]);
}

double PiecewiseSystem::sided_density(int surface, const Point& pt, int side) const {
    SideView v = side_view(surface, pt, side);
    return v.density(pieces[v.piece]);
}

const Expr& PiecewiseSystem::lie_derivative_expr(int piece, int surface, int k) const {
    if (k < 1 || k > kMaxLieOrder)
        throw OrderOverflowError("Lie derivative order " + std::to_string(k) +
                                 " outside supported range 1.." + std::to_string(kMaxLieOrder));
    std::lock_guard<std::mutex> lk(lie_mutex_);
    const SmoothPiece& pc = pieces[piece];
    for (int kk = 1; kk <= k; ++kk) {
        auto key = std::make_tuple(piece, surface, kk);
        if (lie_cache_.count(key)) continue;
        const Expr& prev = kk == 1
                               ? surfaces[surface].h
                               : lie_cache_.at(std::make_tuple(piece, surface, kk - 1));
        Expr d = Expr::add(Expr::mul(prev.derivative(Var::X), pc.fx),
                           Expr::mul(prev.derivative(Var::Y), pc.fy));
        lie_cache_.emplace(key, std::move(d));
    }
    return lie_cache_.at(std::make_tuple(piece, surface, k));
}

double PiecewiseSystem::lie_derivative(int piece, int surface, const Point& pt, int k) const {
    return lie_derivative_expr(piece, surface, k).eval(domain.canonicalize(pt));
}

PiecewiseSystem PiecewiseSystem::reversed() const {
    PiecewiseSystem r(*this);
    for (auto& pc : r.pieces) {
        pc.fx = Expr::neg(pc.fx);
        pc.fy = Expr::neg(pc.fy);
    }
    r.name = name.empty() ? "reversed" : name + "(reversed)";
    return r;
}

// -----------------------------------------------------------------------------
// Scenario text format
// -----------------------------------------------------------------------------

namespace {

struct KeyValue {
    std::string key;
    std::string value;
    bool quoted = false;
};

struct Block {
    std::string kind;
    std::vector<KeyValue> entries;

    const KeyValue* find(const std::string& key) const {
        for (const auto& kv : entries)
            if (kv.key == key) return &kv;
        return nullptr;
    }
    std::string require(const std::string& key) const {
        const KeyValue* kv = find(key);
        if (!kv)
            throw ScenarioError("block '" + kind + "' is missing key '" + key + "'");
        return kv->value;
    }
};

class ScenarioLexer {
public:
    explicit ScenarioLexer(const std::string& text) : text_(text) {}

    std::vector<Block> parse() {
        std::vector<Block> blocks;
        skip_space();
        while (pos_ < text_.size()) {
            Block b;
            b.kind = read_ident();
            skip_space();
            expect('{');
            skip_space();
            while (pos_ < text_.size() && text_[pos_] != '}') {
                KeyValue kv;
                kv.key = read_ident();
                skip_space();
                expect('=');
                skip_space();
                if (pos_ < text_.size() && text_[pos_] == '"') {
                    kv.quoted = true;
                    kv.value = read_quoted();
                } else {
                    kv.value = read_bare();
                }
                b.entries.push_back(std::move(kv));
                skip_space();
                if (pos_ < text_.size() && (text_[pos_] == ';' || text_[pos_] == ',')) {
                    ++pos_;
                    skip_space();
                }
            }
            expect('}');
            blocks.push_back(std::move(b));
            skip_space();
        }
        return blocks;
    }

private:
    void skip_space() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    void expect(char c) {
        if (pos_ >= text_.size() || text_[pos_] != c)
            throw ScenarioError(std::string("expected '") + c + "' at offset " +
                                std::to_string(pos_));
        ++pos_;
    }

    std::string read_ident() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        if (pos_ == start)
            throw ScenarioError("expected identifier at offset " + std::to_string(pos_));
        return text_.substr(start, pos_ - start);
    }

    std::string read_quoted() {
        ++pos_;  // opening quote
        std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != '"') ++pos_;
        if (pos_ >= text_.size())
            throw ScenarioError("unterminated string starting at offset " +
                                std::to_string(start - 1));
        std::string s = text_.substr(start, pos_ - start);
        ++pos_;  // closing quote
        return s;
    }

    std::string read_bare() {
        std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != ';' && text_[pos_] != ',' &&
               text_[pos_] != '}' && text_[pos_] != '\n')
            ++pos_;
        std::string s = text_.substr(start, pos_ - start);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
        if (s.empty())
            throw ScenarioError("expected value at offset " + std::to_string(start));
        return s;
    }

    const std::string& text_;
    std::size_t pos_ = 0;
};

double eval_constant(const std::string& src, const std::string& what) {
    Expr e = parse_expr(src);
    if (!e.is_constant())
        throw ScenarioError(what + " must be a constant expression, got '" + src + "'");
    return e.eval({0.0, 0.0});
}

std::vector<SignReq> parse_signature(const std::string& text, std::size_t n_surfaces) {
    if (text.size() != n_surfaces)
        throw ScenarioError("signature '" + text + "' has " + std::to_string(text.size()) +
                            " entries but the scenario declares " +
                            std::to_string(n_surfaces) + " surfaces");
    std::vector<SignReq> sig;
    for (char c : text) {
        switch (c) {
            case '+': sig.push_back(SignReq::Plus); break;
            case '-': sig.push_back(SignReq::Minus); break;
            case '*': sig.push_back(SignReq::Any); break;
            default:
                throw ScenarioError(std::string("signature character '") + c +
                                    "' is not one of + - *");
        }
    }
    return sig;
}

bool signatures_overlap(const SmoothPiece& a, const SmoothPiece& b) {
    for (std::size_t j = 0; j < a.signature.size(); ++j) {
        SignReq sa = a.signature[j];
        SignReq sb = b.signature[j];
        if (sa != SignReq::Any && sb != SignReq::Any && sa != sb) return false;
    }
    return true;
}

void validate(PiecewiseSystem& sys) {
    if (sys.pieces.empty()) throw ScenarioError("scenario declares no pieces");

    for (std::size_t i = 0; i < sys.pieces.size(); ++i)
        for (std::size_t k = i + 1; k < sys.pieces.size(); ++k)
            if (signatures_overlap(sys.pieces[i], sys.pieces[k]))
                throw ScenarioError("pieces " + std::to_string(i) + " and " +
                                    std::to_string(k) + " have overlapping signatures ('" +
                                    sys.pieces[i].signature_text + "' vs '" +
                                    sys.pieces[k].signature_text + "')");

    // Coverage and regular-value checks on a sampling grid over the
    // fundamental rectangle. Samples near a zero of h are pushed onto the
    // zero by Newton; a degenerate gradient there (or a stall caused by one)
    // fails the regular-value requirement.
    const int n = 64;
    const QuotientDomain& d = sys.domain;
    double scale = std::max(d.p, d.q);
    auto check_regular = [&](const SwitchingSurface& surf, int s, Point z) {
        bool converged = false;
        for (int it = 0; it < 12; ++it) {
            double hv = surf.eval(z);
            if (std::fabs(hv) <= 1e-12) {
                converged = true;
                break;
            }
            Vec2 g = surf.gradient(z);
            double g2 = g.dot(g);
            if (g2 < 1e-18) break;
            z = z - (hv / g2) * g;
        }
        double hv = std::fabs(surf.eval(z));
        if (converged && surf.gradient(z).norm() <= 1e-9)
            throw ScenarioError("0 is not a regular value of surface " + std::to_string(s) +
                                " near (" + format_double(z.x) + ", " + format_double(z.y) +
                                ")");
        if (!converged && hv < 1e-6 * std::max(1.0, scale))
            throw ScenarioError("surface " + std::to_string(s) +
                                " has a degenerate zero near (" + format_double(z.x) + ", " +
                                format_double(z.y) + ")");
    };
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            Point pt{d.x0 + (i + 0.5) / n * d.p, d.y0 + (j + 0.5) / n * d.q};
            std::vector<int> signs = sys.signs_at(pt, 1e-9);
            bool on_surface = false;
            for (std::size_t s = 0; s < sys.surfaces.size(); ++s) {
                double h = sys.surfaces[s].eval(pt);
                if (std::fabs(h) < 0.02 * scale)
                    check_regular(sys.surfaces[s], static_cast<int>(s), pt);
                if (signs[s] == 0) on_surface = true;
            }
            if (on_surface) continue;
            int matches = 0;
            for (const auto& pc : sys.pieces)
                if (pc.matches(signs)) ++matches;
            if (matches == 0) {
                std::string sig;
                for (int s : signs) sig += (s > 0 ? '+' : '-');
                throw ScenarioError("no piece covers realized sign combination '" + sig +
                                    "' at (" + format_double(pt.x) + ", " +
                                    format_double(pt.y) + ")");
            }
        }
    }
}

}  // namespace

PiecewiseSystem load_scenario(const std::string& text) {
    std::vector<Block> blocks = ScenarioLexer(text).parse();

    PiecewiseSystem sys;
    bool have_domain = false;
    std::size_t n_surfaces = 0;
    for (const auto& b : blocks)
        if (b.kind == "surface") ++n_surfaces;

    for (const auto& b : blocks) {
        if (b.kind == "domain") {
            if (have_domain) throw ScenarioError("duplicate domain block");
            have_domain = true;
            DomainMode mode = domain_mode_from_string(b.require("mode"));
            double x0 = eval_constant(b.require("x0"), "domain.x0");
            double y0 = eval_constant(b.require("y0"), "domain.y0");
            double p = eval_constant(b.require("p"), "domain.p");
            double q = eval_constant(b.require("q"), "domain.q");
            sys.domain = QuotientDomain(mode, x0, y0, p, q);
        } else if (b.kind == "surface") {
            SwitchingSurface s;
            s.source = b.require("h");
            s.h = parse_expr(s.source);
            s.hx = s.h.derivative(Var::X);
            s.hy = s.h.derivative(Var::Y);
            sys.surfaces.push_back(std::move(s));
        } else if (b.kind == "piece") {
            SmoothPiece pc;
            pc.signature_text = b.require("signature");
            pc.signature = parse_signature(pc.signature_text, n_surfaces);
            pc.fx = parse_expr(b.require("fx"));
            pc.fy = parse_expr(b.require("fy"));
            const KeyValue* dens = b.find("density");
            pc.density = dens ? parse_expr(dens->value) : Expr::number(1.0);
            sys.pieces.push_back(std::move(pc));
        } else if (b.kind == "meta") {
            if (const KeyValue* kv = b.find("name")) sys.name = kv->value;
        } else {
            throw ScenarioError("unknown block kind '" + b.kind + "'");
        }
    }
    if (!have_domain) throw ScenarioError("scenario is missing the domain block");
    if (sys.surfaces.empty()) throw ScenarioError("scenario declares no surfaces");

    validate(sys);
    return sys;
}

PiecewiseSystem load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_scenario(ss.str());
}

}  // namespace filippov
