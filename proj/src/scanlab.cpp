#include "lozilab/scanlab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "lozilab/cones.hpp"
#include "lozilab/emit.hpp"
#include "lozilab/renorm.hpp"

namespace lozi {

const std::vector<std::string>& condition_ids() {
    static const std::vector<std::string> ids = {"S1", "S2", "S3", "C1", "C2", "C3", "L1", "L2",
                                                 "L3", "L4", "R1", "R2", "R3", "R4", "T1", "T2"};
    return ids;
}

namespace {

Verdict pf(bool b) { return b ? Verdict::PASS : Verdict::FAIL; }

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void set(ClassificationRecord& r, const std::string& id, Verdict v, std::string stamp, std::string note = "") {
    r.verdicts[id] = {v, std::move(stamp), std::move(note)};
}

void mark_rest(ClassificationRecord& r, std::initializer_list<const char*> ids, const std::string& why) {
    for (const char* id : ids)
        if (!r.verdicts.count(id)) set(r, id, Verdict::INDETERMINATE, "-", why);
}

SampleRegion region_of(const BBox& b) {
    SampleRegion s;
    s.lo = b.lo;
    s.hi = b.hi;
    return s;
}

}  // namespace

ClassificationRecord classify_parameter(const ParamFamily& fam, const Params& mu, const Budgets& b) {
    ClassificationRecord r;
    r.family = fam.name;
    r.mu = mu;

    PiecewiseMap m;
    try {
        m = fam.instantiate(mu);
    } catch (const std::exception& e) {
        r.error = e.what();
        mark_rest(r, {"S1", "S2", "S3", "C1", "C2", "C3", "L1", "L2", "L3", "L4", "R1", "R2", "R3", "R4", "T1", "T2"},
                  "instantiate failed");
        return r;
    }
    r.epsilon = m.epsilon;

    // S1: one orientation type on both branches
    auto orient = orientation_report(m, 40);
    set(r, "S1", pf(orient.consistent && orient.sign == m.epsilon), "grid=40x40",
        "sign " + std::to_string(orient.sign));

    std::optional<AffineCones> cones;
    if (m.affine()) cones = synthesize_affine_cones(m);
    r.m0 = fam.in_M0(mu) || (cones && cones->m0_like);
    if (cones) {
        r.lambda_est = cones->lambda;
        r.metrics["c_min"] = cones->c_min;
        r.metrics["c_max"] = cones->c_max;
    }

    SampleRegion box;
    const std::string sstamp = "samples=" + std::to_string(b.cone_samples);
    if (!m.affine()) {
        const std::string why = "no closed-form cones for non-affine branches";
        mark_rest(r, {"S2", "C1", "C2", "C3", "L3"}, why);
    } else if (!cones) {
        set(r, "C1", Verdict::FAIL, "closed-form", "no invariant slope interval");
        set(r, "C2", Verdict::FAIL, "closed-form", "no invariant slope interval");
        set(r, "C3", Verdict::FAIL, "closed-form", "no invariant slope interval");
        set(r, "S2", Verdict::FAIL, "closed-form", "no shared cone fields");
        set(r, "L3", Verdict::FAIL, "closed-form", "no cones");
    } else {
        set(r, "C1", pf(cones->disjoint), "closed-form", "c=" + fmt(cones->c) + " d=" + fmt(cones->d));
        auto inv = verify_invariance(m, cones->u, cones->s, b.cone_samples, box, b.seed);
        set(r, "C2", pf(inv.pass), sstamp, std::to_string(inv.invariance_failures.size()) + " failures");
        auto ex = verify_expansion(m, cones->u, cones->s, 1.0, b.cone_samples, box, b.seed);
        set(r, "C3", pf(ex.pass && cones->lambda > 1.0), sstamp, "lambda_est " + fmt(ex.lambda_estimate));
        r.metrics["lambda_sampled"] = ex.lambda_estimate;
        set(r, "S2", pf(inv.pass && ex.pass && cones->disjoint), sstamp, "constant cone pair on both branches");
        if (r.m0)
            set(r, "L3", Verdict::INDETERMINATE, "closed-form", "degenerate cones");
        else
            set(r, "L3", pf(cones->lambda > std::sqrt(2.0)), "closed-form", "lambda " + fmt(cones->lambda));
    }

    // S3: the image of the divider is a u-curve
    {
        UniversalConePair k = cones ? cones->u.universal : UniversalConePair{};
        Polyline di = divider_image(m, m.window.lo.y, m.window.hi.y);
        bool ok = di.size() >= 2;
        if (ok) {
            try {
                auto c = make_curve(Orientation::U, di, slope_bound_for(k.unstable.coeff));
                ok = validate_curve(c, k.unstable).valid;
            } catch (const std::exception&) {
                ok = false;
            }
        }
        set(r, "S3", pf(ok), "tol=1e-12");
    }

    if (r.m0) {
        mark_rest(r, {"L1", "L2", "L3", "L4", "R1", "R2", "R3", "R4", "T1", "T2"}, "M0");
        return r;
    }

    FixedPointData fp;
    try {
        fp = fixed_points(m);
    } catch (const std::exception& e) {
        r.error = std::string("fixed points: ") + e.what();
        auto vol = check_volume_contraction(m, b.cone_samples, box, b.seed);
        set(r, "L1", pf(vol.pass), sstamp, "det_max " + fmt(vol.det_max));
        mark_rest(r, {"L2", "L3", "L4", "R1", "R2", "R3", "R4", "T1", "T2"}, "no fixed points");
        return r;
    }

    // orbit window sets the resolution of the trapping checks
    BBox win;
    bool escaped = false;
    {
        Vec2 z = fp.X.z + 1e-6 * fp.X.v_u;
        for (int k = 0; k < 3000; ++k) {
            z = m(z);
            if (!std::isfinite(z.x) || std::abs(z.x) + std::abs(z.y) > 1e6) {
                escaped = true;
                break;
            }
            if (k >= 200) win.add(z);
        }
    }

    if (!b.attractor_checks || escaped || !fp.X.hyperbolic) {
        BBox vb = win.empty() ? BBox{{-1.5, -0.5}, {1.5, 0.5}} : win;
        auto vol = check_volume_contraction(m, b.cone_samples, region_of(vb), b.seed);
        set(r, "L1", pf(vol.pass), sstamp, "det_max " + fmt(vol.det_max));
        r.metrics["det_max"] = vol.det_max;
        std::string why = !b.attractor_checks ? "skipped" : escaped ? "orbit of X escapes" : "X not hyperbolic";
        if (escaped)
            set(r, "L2", Verdict::FAIL, "orbit=3000", why);
        else
            mark_rest(r, {"L2"}, why);
        mark_rest(r, {"L4"}, why);
    } else {
        double h = win.diam() / b.resolution;
        r.metrics["h"] = h;
        std::string hstamp = "h=" + fmt(h) + " touch_tol=1e-10";
        try {
            GResult G = make_G(m, h);
            LReport L = check_L_conditions(m, cones, G);
            set(r, "L1", L.L1, sstamp, "det_max " + fmt(L.det_max));
            set(r, "L2", L.L2, hstamp, "G by " + G.method + ", margin " + fmt(L.trapping_margin));
            set(r, "L4", L.L4, hstamp, std::to_string(L.L4_components) + " components");
            r.metrics["det_max"] = L.det_max;
            r.metrics["trapping_margin"] = L.trapping_margin;
        } catch (const std::exception& e) {
            auto vol = check_volume_contraction(m, b.cone_samples, region_of(win), b.seed);
            set(r, "L1", pf(vol.pass), sstamp, "det_max " + fmt(vol.det_max));
            mark_rest(r, {"L2", "L4"}, std::string("G: ") + e.what());
        }
    }

    if (!m.affine() || !cones) {
        mark_rest(r, {"R1", "R2", "R3", "R4", "T1", "T2"}, "needs affine branches with cones");
        return r;
    }

    // renormalization rectangle on the normalized conjugate
    PiecewiseMap g = normalized(m);
    std::optional<RenormRect> rr;
    try {
        rr = find_rectangle(g, cones->c_min);
    } catch (const std::exception& e) {
        r.error = std::string("rectangle: ") + e.what();
    }
    if (!rr) {
        mark_rest(r, {"R1", "R2", "R3", "R4", "T1", "T2"}, "no rectangle");
        return r;
    }
    auto R = check_R_conditions(g, *rr);
    const std::string rstamp = "face grid 30x5";
    set(r, "R1", pf(R.R1), rstamp, "margin " + fmt(R.R1_margin));
    set(r, "R2", pf(R.R2_left && R.R2_right && R.R2_lower && R.R2_upper_alt), rstamp,
        R.R2_upper_literal ? "upper face literal reading holds" : "upper face above divider image");
    set(r, "R3", pf(R.R3), rstamp);
    set(r, "R4", pf(R.R4), rstamp, std::to_string(R.R4_intervals) + " intervals");
    r.metrics["R1_margin"] = R.R1_margin;
    if (!R.pass) {
        mark_rest(r, {"T1", "T2"}, "R conditions fail");
        return r;
    }

    try {
        auto part = build_partition(g, *rr, std::max(12, b.n_max + 2));
        auto rd = first_return(g, part, b.n_max, b.strip_samples, b.seed);
        r.metrics["return_certificate"] = rd.pass ? 1.0 : 0.0;

        std::vector<SLine> beta, gamma;
        build_lines(g, 12, beta, gamma);
        auto tm = build_triangle(g, gamma);
        r.metrics["tower_height"] = tm.tower_height;
        auto T = classify_tangency(g, tm, gamma);
        const std::string tstamp = "gamma_i, i<=12";
        set(r, "T1", pf(T.verdict == Tangency::T1), tstamp, T.detail);
        set(r, "T2", pf(T.verdict == Tangency::T2), tstamp, T.detail);
    } catch (const std::exception& e) {
        mark_rest(r, {"T1", "T2"}, std::string("triangle: ") + e.what());
    }
    return r;
}

std::vector<Params> grid_nodes(const ScanConfig& cfg) {
    std::vector<Params> out{cfg.fixed};
    for (const auto& ax : cfg.axes) {
        std::vector<Params> next;
        for (const auto& p : out)
            for (int k = 0; k < std::max(1, ax.count); ++k) {
                Params q = p;
                q[ax.name] = ax.at(k);
                next.push_back(q);
            }
        out = std::move(next);
    }
    return out;
}

std::vector<ClassificationRecord> scan_grid(const ScanConfig& cfg) {
    if (cfg.axes.empty()) throw usage_error("scan: empty parameter grid");
    for (const auto& ax : cfg.axes)
        if (ax.count < 1) throw usage_error("scan: axis " + ax.name + " has no nodes");
    if (cfg.budgets.cone_samples == 0 || cfg.budgets.resolution <= 0 || cfg.budgets.n_max < 2)
        throw usage_error("scan: budgets must be positive");
    ParamFamily fam = family_by_name(cfg.family);
    auto nodes = grid_nodes(cfg);
    std::vector<ClassificationRecord> out(nodes.size());

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next++) < nodes.size();) {
            try {
                out[i] = classify_parameter(fam, nodes[i], cfg.budgets);
            } catch (const std::exception& e) {
                ClassificationRecord r;
                r.family = fam.name;
                r.mu = nodes[i];
                r.error = e.what();
                for (const auto& id : condition_ids()) r.verdicts[id] = {Verdict::INDETERMINATE, "-", "node failed"};
                out[i] = r;
            }
        }
    };
    int nt = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    nt = std::min<int>(nt, static_cast<int>(nodes.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return out;
}

namespace {

struct OffsetFn {
    const ParamFamily& fam;
    Params base;
    std::string px, py;
    int i;

    Params at(Vec2 p) const {
        Params q = base;
        q[px] = p.x;
        q[py] = p.y;
        return q;
    }
    double operator()(Vec2 p) const {
        try {
            return gamma_offset(normalized(fam.instantiate(at(p))), i);
        } catch (const std::exception&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    }
};

LocusVertex vertex_at(const OffsetFn& F, Vec2 p, double off) {
    LocusVertex v;
    v.mu = F.at(p);
    v.offset = off;
    v.tower_height = std::numeric_limits<double>::quiet_NaN();
    try {
        PiecewiseMap g = normalized(F.fam.instantiate(v.mu));
        std::vector<SLine> beta, gamma;
        build_lines(g, std::max(12, F.i + 2), beta, gamma);
        v.tower_height = build_triangle(g, gamma).tower_height;
        if (auto c = synthesize_affine_cones(g)) {
            v.cone_coefficient = c->c_min;
            v.lambda = c->lambda;
        }
    } catch (const std::exception&) {
    }
    return v;
}

// root of F on the circle |p - c| = r around the predicted direction
std::optional<std::pair<Vec2, double>> correct_on_circle(const OffsetFn& F, Vec2 c, double r, Vec2 t, double tol) {
    auto point = [&](double phi) {
        Vec2 n{-t.y, t.x};
        return c + r * (std::cos(phi) * t + std::sin(phi) * n);
    };
    auto f = [&](double phi) { return F(point(phi)); };
    double f0 = f(0.0);
    if (std::isnan(f0)) return std::nullopt;
    if (std::abs(f0) < tol) return std::make_pair(point(0.0), f0);
    double lo = 0, flo = f0, hi = 0, fhi = f0;
    bool found = false;
    for (double d = 0.02; d <= 1.0 && !found; d *= 1.5) {
        for (double s : {d, -d}) {
            double fs = f(s);
            if (!std::isnan(fs) && (fs < 0) != (f0 < 0)) {
                // tighten to the sign change nearest to 0
                double a = s / 1.5 * (std::abs(s) > 0.02 ? 1.0 : 0.0), fa = a == 0 ? f0 : f(a);
                if (std::isnan(fa) || (fa < 0) == (fs < 0)) {
                    a = 0;
                    fa = f0;
                }
                lo = a;
                flo = fa;
                hi = s;
                fhi = fs;
                found = true;
                break;
            }
        }
    }
    if (!found) return std::nullopt;
    // Illinois regula falsi
    int side = 0;
    for (int it = 0; it < 200; ++it) {
        double x = (lo * fhi - hi * flo) / (fhi - flo);
        double fx = f(x);
        if (std::isnan(fx)) return std::nullopt;
        if (std::abs(fx) < tol || std::abs(hi - lo) < 1e-15) return std::make_pair(point(x), fx);
        if ((fx < 0) == (fhi < 0)) {
            hi = x;
            fhi = fx;
            if (side == -1) flo *= 0.5;
            side = -1;
        } else {
            lo = x;
            flo = fx;
            if (side == 1) fhi *= 0.5;
            side = 1;
        }
    }
    return std::nullopt;
}

}  // namespace

TangencyLocus trace_tangency(const ParamFamily& fam, int i, const TangencyStart& start, const std::string& slide,
                             int steps, double step, double m0_tol) {
    TangencyLocus L;
    L.index = i;
    L.free_param = start.param;
    L.slide_param = slide;
    L.step = step;
    auto roots = tangency_curve(fam, start.base, start.param, start.lo, start.hi, i, 40, 1e-13);
    const TangencyRoot* root = nullptr;
    for (const auto& rt : roots)
        if (std::abs(rt.offset) < 1e-9) {
            root = &rt;
            break;
        }
    if (!root) {
        L.truncated = true;
        L.stop_reason = "no root on the start segment";
        return L;
    }
    OffsetFn F{fam, start.base, start.param, slide, i};
    auto base_slide = start.base.find(slide);
    if (base_slide == start.base.end()) {
        L.truncated = true;
        L.stop_reason = "slide parameter missing from base";
        return L;
    }
    Vec2 p{root->mu, base_slide->second};
    L.vertices.push_back(vertex_at(F, p, root->offset));

    Vec2 prev_t{0, 0};
    const double tol = 1e-12;
    for (int k = 0; k < steps; ++k) {
        double hd = 1e-7;
        double gx = (F(p + Vec2{hd, 0}) - F(p - Vec2{hd, 0})) / (2 * hd);
        double gy = (F(p + Vec2{0, hd}) - F(p - Vec2{0, hd})) / (2 * hd);
        Vec2 t{-gy, gx};
        double nt = norm(t);
        if (!std::isfinite(nt) || nt == 0) {
            L.truncated = true;
            L.stop_reason = "singular gradient";
            return L;
        }
        t = (1.0 / nt) * t;
        if (k == 0 ? t.y > 0 : dot(t, prev_t) < 0) t = -1.0 * t;
        prev_t = t;

        Vec2 pred = p + step * t;
        if (fam.in_M0(F.at(pred)) || pred.y <= 0) {
            L.stop_reason = "domain boundary";
            L.reached_M0 = L.vertices.back().cone_coefficient < 2 * m0_tol;
            return L;
        }
        auto c = correct_on_circle(F, p, step, t, tol);
        if (!c) {
            L.truncated = true;
            L.stop_reason = "corrector diverged";
            return L;
        }
        p = c->first;
        L.vertices.push_back(vertex_at(F, p, c->second));
        if (L.vertices.back().cone_coefficient < m0_tol) {
            L.reached_M0 = true;
            L.stop_reason = "cone coefficient below " + fmt(m0_tol);
            return L;
        }
    }
    L.stop_reason = "step cap";
    return L;
}

std::string Config::get(const std::string& section, const std::string& key, const std::string& fallback) const {
    auto s = sections.find(section);
    if (s == sections.end()) return fallback;
    auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
}

bool Config::has(const std::string& section, const std::string& key) const {
    auto s = sections.find(section);
    return s != sections.end() && s->second.count(key);
}

namespace {
std::string trim(const std::string& s) {
    auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}
}  // namespace

Config parse_config(const std::string& text) {
    Config c;
    std::string section = "global";
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw usage_error("config line " + std::to_string(lineno) + ": bad section");
            section = trim(line.substr(1, line.size() - 2));
            c.sections[section];
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw usage_error("config line " + std::to_string(lineno) + ": expected key = value");
        c.sections[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return c;
}

Config load_config(const std::string& path) { return parse_config(read_text(path)); }

std::vector<AxisRange> parse_axes(const std::string& text) {
    std::vector<AxisRange> out;
    std::string t = text;
    std::replace(t.begin(), t.end(), ';', ' ');
    std::istringstream in(t);
    std::string item;
    while (in >> item) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw usage_error("axis '" + item + "': expected name=lo:hi:count");
        AxisRange ax;
        ax.name = trim(item.substr(0, eq));
        std::string rest = item.substr(eq + 1);
        std::replace(rest.begin(), rest.end(), ':', ' ');
        std::istringstream rs(rest);
        if (!(rs >> ax.lo >> ax.hi >> ax.count) || ax.count < 1)
            throw usage_error("axis '" + item + "': expected name=lo:hi:count");
        out.push_back(ax);
    }
    return out;
}

namespace {
template <class T>
T number(const Config& c, const std::string& sec, const std::string& key, T fallback) {
    if (!c.has(sec, key)) return fallback;
    std::string v = c.get(sec, key);
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return static_cast<T>(d);
    } catch (const std::exception&) {
        throw usage_error("config [" + sec + "] " + key + ": not a number: " + v);
    }
}
}  // namespace

ScanConfig scan_config_from(const Config& c) {
    ScanConfig s;
    s.family = c.get("scan", "family", c.get("global", "family", s.family));
    std::string fixed = c.get("scan", "params", c.get("global", "params", ""));
    if (!fixed.empty()) s.fixed = parse_params(fixed);
    s.axes = parse_axes(c.get("scan", "axes", ""));
    s.budgets.cone_samples = number<std::size_t>(c, "scan", "samples", s.budgets.cone_samples);
    s.budgets.resolution = number<int>(c, "scan", "resolution", s.budgets.resolution);
    s.budgets.n_max = number<int>(c, "scan", "n_max", s.budgets.n_max);
    s.budgets.strip_samples = number<std::size_t>(c, "scan", "strip_samples", s.budgets.strip_samples);
    s.budgets.seed = number<std::uint64_t>(c, "scan", "seed", number<std::uint64_t>(c, "global", "seed", 1));
    s.budgets.attractor_checks = c.get("scan", "attractor_checks", "true") != "false";
    s.threads = number<int>(c, "scan", "threads", 0);
    s.out_csv = c.get("scan", "csv", s.out_csv);
    s.out_json = c.get("scan", "json", s.out_json);
    s.out_svg = c.get("scan", "svg", s.out_svg);
    return s;
}

}  // namespace lozi
