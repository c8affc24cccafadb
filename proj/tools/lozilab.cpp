#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lozilab/attractor.hpp"
#include "lozilab/emit.hpp"
#include "lozilab/manifolds.hpp"
#include "lozilab/renorm.hpp"
#include "lozilab/scanlab.hpp"

using namespace lozi;
using nlohmann::json;

namespace {

struct Globals {
    std::string family = "lozi";
    std::string params;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    std::string config;
};

std::string out_path(const Globals& g, const std::string& name) {
    if (name.empty()) return name;
    std::filesystem::path p(name);
    if (p.is_absolute()) return name;
    return (std::filesystem::path(g.out_dir) / p).string();
}

void save(const Globals& g, const std::string& name, const std::string& content) {
    if (name.empty()) return;
    std::string p = out_path(g, name);
    write_text(p, content);
    std::cout << "wrote " << p << "\n";
}

void save_json(const Globals& g, const std::string& name, const std::string& kind, json payload) {
    json j = envelope(kind, std::move(payload));
    j["family"] = g.family;
    j["seed"] = g.seed;
    save(g, name, j.dump(2) + "\n");
}

PiecewiseMap load_map(const Globals& g, Params* mu = nullptr) {
    ParamFamily fam = family_by_name(g.family);
    Params p = g.params.empty() ? Params{} : parse_params(g.params);
    for (const auto& [k, v] : p) {
        (void)v;
        if (std::find(fam.param_names.begin(), fam.param_names.end(), k) == fam.param_names.end())
            throw usage_error("family " + g.family + " has no parameter '" + k + "'");
    }
    if (mu) *mu = p;
    return fam.instantiate(p);
}

// h from the renormalization rectangle when one exists, otherwise from an orbit window
double resolution_h(const PiecewiseMap& m, int res, std::string& source) {
    if (auto ac = m.affine() ? synthesize_affine_cones(m) : std::nullopt) {
        try {
            if (auto rr = find_rectangle(normalized(m), ac->c_min)) {
                source = "rectangle";
                return rr->R.diam() / res;
            }
        } catch (const std::exception&) {
        }
    }
    auto fp = fixed_points(m);
    Vec2 z = fp.X.z + 1e-6 * fp.X.v_u;
    BBox b;
    for (int k = 0; k < 5000; ++k) {
        z = m(z);
        if (k > 200) b.add(z);
    }
    source = "orbit window";
    return b.diam() / res;
}

struct AttractorRun {
    GResult G;
    AttractorApprox att;
    double h = 0;
    std::string h_source;
};

AttractorRun run_attractor(const PiecewiseMap& m, int n, int res) {
    AttractorRun r;
    r.h = resolution_h(m, res, r.h_source);
    r.G = make_G(m, r.h);
    if (r.G.regions.empty()) throw condition_error("no trapping region G found");
    r.att = iterate_region(m, r.G.regions.front(), n, grid_for({}, r.h));
    return r;
}

BBox parse_box(const std::string& s) {
    // x0:x1,y0:y1
    double x0, x1, y0, y1;
    char c1, c2, c3;
    std::istringstream in(s);
    if (!(in >> x0 >> c1 >> x1 >> c2 >> y0 >> c3 >> y1) || c1 != ':' || c2 != ',' || c3 != ':' || x0 >= x1 ||
        y0 >= y1)
        throw usage_error("--box expects x0:x1,y0:y1, got '" + s + "'");
    return {{x0, y0}, {x1, y1}};
}

Loop box_loop(const BBox& b) { return {b.lo, {b.hi.x, b.lo.y}, b.hi, {b.lo.x, b.hi.y}}; }

std::string polylines_csv(const std::vector<Polyline>& ls) {
    std::string out = "piece,x,y\n";
    char buf[96];
    for (std::size_t i = 0; i < ls.size(); ++i)
        for (auto p : ls[i]) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, p.x, p.y);
            out += buf;
        }
    return out;
}

// config values for keys not given on the command line, as --key=value
std::vector<std::string> with_config(std::vector<std::string> args, const std::vector<std::string>& subs) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;
    Config c = load_config(path);
    std::string sub;
    for (const auto& a : args)
        if (std::find(subs.begin(), subs.end(), a) != subs.end()) {
            sub = a;
            break;
        }
    auto given = [&](const std::string& key) {
        for (const auto& a : args)
            if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) return true;
        return false;
    };
    std::vector<std::string> extra;
    for (const std::string& sec : {sub, std::string("global")}) {
        auto it = c.sections.find(sec);
        if (sec.empty() || it == c.sections.end()) continue;
        for (const auto& [k, v] : it->second)
            if (!given(k)) {
                extra.push_back("--" + k + "=" + v);
                args.push_back(extra.back());
            }
    }
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lozilab: Lozi-like maps, cone fields, renormalization and attractors"};
    app.fallthrough();
    app.require_subcommand(1);
    Globals g;
    app.add_option("--family", g.family, "map family: lozi, bcnf, bcnf_sym, smooth_lozi, rotation");
    app.add_option("--params", g.params, "parameters, e.g. a=1.9,b=0.1");
    app.add_option("--seed", g.seed, "seed for every sampled check");
    app.add_option("--out-dir", g.out_dir, "directory for output files");
    app.add_option("--config", g.config, "key = value config with [subcommand] sections");

    // check
    auto* check = app.add_subcommand("check", "classify one parameter");
    Budgets cb;
    bool check_no_att = false;
    std::string check_out = "check.json";
    check->add_option("--samples", cb.cone_samples, "cone samples")->check(CLI::PositiveNumber);
    check->add_option("--res", cb.resolution, "trapping resolution (h = diam/res)")->check(CLI::PositiveNumber);
    check->add_option("--n-max", cb.n_max, "return strips")->check(CLI::Range(2, 30));
    check->add_flag("--no-attractor", check_no_att, "skip L2 and L4");
    check->add_option("--out", check_out, "JSON report");

    // scan
    auto* scan = app.add_subcommand("scan", "classify a parameter grid");
    ScanConfig sc;
    std::string axes;
    bool scan_no_att = false;
    std::string scan_map = "L1,L3";
    scan->add_option("--axes", axes, "grid, e.g. \"a=1.5:2.0:6 b=0.05:0.3:6\" (space or ; separated)")->required();
    scan->add_option("--samples", sc.budgets.cone_samples, "cone samples")->check(CLI::PositiveNumber);
    scan->add_option("--res", sc.budgets.resolution, "trapping resolution")->check(CLI::PositiveNumber);
    scan->add_option("--n-max", sc.budgets.n_max, "return strips")->check(CLI::Range(2, 30));
    scan->add_option("--strip-samples", sc.budgets.strip_samples, "samples per return strip")
        ->check(CLI::PositiveNumber);
    scan->add_option("--threads", sc.threads, "worker threads, 0 = all cores");
    scan->add_flag("--no-attractor", scan_no_att, "skip L2 and L4");
    scan->add_option("--csv", sc.out_csv, "CSV records");
    scan->add_option("--json", sc.out_json, "JSON records");
    sc.out_svg = "scan.svg";
    scan->add_option("--svg", sc.out_svg, "parameter map over the first two axes");
    scan->add_option("--map", scan_map, "conditions that must all pass in the parameter map");

    // renorm
    auto* renorm = app.add_subcommand("renorm", "rectangle, R-conditions, return map, ordering, theta table");
    int rn_max = 8, theta_i = 4, theta_m = 8;
    std::size_t rn_samples = 1000;
    std::string rn_out = "renorm.json", rn_plot = "renorm.svg";
    renorm->add_option("--n-max", rn_max, "last return strip")->check(CLI::Range(2, 30));
    renorm->add_option("--samples", rn_samples, "samples per strip")->check(CLI::PositiveNumber);
    renorm->add_option("--theta-i", theta_i, "theta rows")->check(CLI::Range(1, 20));
    renorm->add_option("--theta-m", theta_m, "theta columns")->check(CLI::Range(2, 30));
    renorm->add_option("--out", rn_out, "JSON report");
    renorm->add_option("--plot", rn_plot, "SVG of R, the strips C_n and U_n");

    // tangency
    auto* tan = app.add_subcommand("tangency", "trace a gamma-tangency locus");
    int t_index = 3, t_steps = 60;
    std::string t_param = "a", t_slide = "delta";
    double t_lo = 1.4, t_hi = 1.7, t_step = 0.01, t_m0 = 5e-3;
    std::string t_out = "tangency.json", t_csv = "tangency.csv", t_plot = "tangency.svg";
    tan->add_option("--index", t_index, "gamma index i")->check(CLI::Range(1, 30));
    tan->add_option("--param", t_param, "parameter searched on the start segment");
    tan->add_option("--lo", t_lo, "start segment lower end");
    tan->add_option("--hi", t_hi, "start segment upper end");
    tan->add_option("--slide", t_slide, "second locus coordinate, decreased toward M0");
    tan->add_option("--steps", t_steps, "step cap")->check(CLI::PositiveNumber);
    tan->add_option("--step", t_step, "continuation step")->check(CLI::PositiveNumber);
    tan->add_option("--m0-tol", t_m0, "stop when the cone coefficient drops below")->check(CLI::PositiveNumber);
    tan->add_option("--out", t_out, "JSON locus");
    tan->add_option("--csv", t_csv, "CSV vertices");
    tan->add_option("--plot", t_plot, "SVG of the locus");

    // manifold
    auto* man = app.add_subcommand("manifold", "grow W^u(X) and W^s(X)");
    int gen_u = 12, gen_s = 40;
    double m_budget = 500;
    std::string m_side = "both", m_out = "manifold.json";
    man->add_option("--side", m_side, "unstable, stable or both")->check(CLI::IsMember({"unstable", "stable", "both"}));
    man->add_option("--budget", m_budget, "length budget per side")->check(CLI::PositiveNumber);
    man->add_option("--generations", gen_u, "unstable generation cap")->check(CLI::Range(0, 40));
    man->add_option("--stable-generations", gen_s, "stable generation cap")->check(CLI::Range(0, 60));
    man->add_option("--out", m_out, "output file; .json, .svg or .csv");

    // attractor
    auto* attc = app.add_subcommand("attractor", "trapping region, iterated cover, Hausdorff and mixing checks");
    int a_n = 60, a_res = 1024, a_wu = 12;
    bool a_haus = false, a_mix = false;
    std::string a_out = "att.csv", a_plot = "att.svg", a_json = "attractor.json";
    std::size_t a_cap = 200000;
    attc->add_option("--n", a_n, "iterations of G")->check(CLI::Range(0, 500));
    attc->add_option("--res", a_res, "h = diam R / res")->check(CLI::PositiveNumber);
    attc->add_flag("--hausdorff", a_haus, "compare with W^u(X)");
    attc->add_flag("--mixing", a_mix, "box transition matrix");
    attc->add_option("--wu-generations", a_wu, "W^u generations for --hausdorff")->check(CLI::Range(0, 40));
    attc->add_option("--out", a_out, "CSV of points");
    attc->add_option("--plot", a_plot, "SVG");
    attc->add_option("--plot-cap", a_cap, "max points drawn")->check(CLI::PositiveNumber);
    attc->add_option("--json", a_json, "JSON report");

    // basin
    auto* basin = app.add_subcommand("basin", "Monte Carlo fraction of a box converging to the attractor");
    std::string b_box = "-2:2,-1:1", b_out = "basin.json";
    std::size_t b_samples = 100000;
    int b_horizon = 2000, b_n = 60, b_res = 1024, b_threads = 0;
    basin->add_option("--box", b_box, "x0:x1,y0:y1");
    basin->add_option("--samples", b_samples, "samples")->check(CLI::PositiveNumber);
    basin->add_option("--horizon", b_horizon, "iterations per sample")->check(CLI::PositiveNumber);
    basin->add_option("--n", b_n, "iterations of G for the cover")->check(CLI::Range(0, 500));
    basin->add_option("--res", b_res, "h = diam R / res")->check(CLI::PositiveNumber);
    basin->add_option("--threads", b_threads, "worker threads, 0 = all cores");
    basin->add_option("--out", b_out, "JSON report");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = with_config(args, {"check", "scan", "renorm", "tangency", "manifold", "attractor", "basin"});
    } catch (const io_error& e) {
        std::cerr << "lozilab: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "lozilab: " << e.what() << "\n";
        return 1;
    }
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*check) {
            Params mu;
            load_map(g, &mu);
            cb.seed = g.seed;
            cb.attractor_checks = !check_no_att;
            auto rec = classify_parameter(family_by_name(g.family), mu, cb);
            PiecewiseMap m = family_by_name(g.family).instantiate(mu);
            json payload = to_json(rec);
            if (auto ac = m.affine() ? synthesize_affine_cones(m) : std::nullopt) {
                auto rep = verify_expansion(m, ac->u, ac->s, std::sqrt(2.0), cb.cone_samples, {}, g.seed);
                payload["hyperbolicity"] = {{"lambda_estimate", rep.lambda_estimate},
                                            {"lambda_target", rep.lambda_target},
                                            {"det_max", rep.det_max},
                                            {"samples", rep.samples},
                                            {"skipped", rep.skipped},
                                            {"failures", rep.invariance_failures.size()},
                                            {"pass", rep.pass},
                                            {"c_min", ac->c_min},
                                            {"c_max", ac->c_max},
                                            {"lambda_certified", ac->lambda}};
            }
            for (const auto& id : condition_ids())
                std::cout << id << " " << to_string(rec.verdicts[id].verdict) << "  " << rec.verdicts[id].note << "\n";
            save_json(g, check_out, "classification", payload);
        } else if (*scan) {
            sc.family = g.family;
            if (!g.params.empty()) sc.fixed = parse_params(g.params);
            sc.axes = parse_axes(axes);
            sc.budgets.seed = g.seed;
            sc.budgets.attractor_checks = !scan_no_att;
            family_by_name(sc.family);
            auto recs = scan_grid(sc);
            std::size_t errors = 0;
            for (const auto& r : recs) errors += !r.error.empty();
            std::cout << recs.size() << " records, " << errors << " node errors\n";
            save(g, sc.out_csv, records_csv(recs));
            json j = records_json(recs);
            j["family"] = g.family;
            j["seed"] = g.seed;
            j["axes"] = axes;
            save(g, sc.out_json, j.dump(2) + "\n");
            if (!sc.out_svg.empty()) {
                std::vector<std::string> conds;
                std::istringstream in(scan_map);
                for (std::string c; std::getline(in, c, ',');) conds.push_back(c);
                std::string x = sc.axes[0].name, y = sc.axes.size() > 1 ? sc.axes[1].name : x;
                save(g, sc.out_svg, parameter_map_svg(recs, x, y, conds));
            }
        } else if (*renorm) {
            PiecewiseMap m0 = load_map(g);
            auto ac = synthesize_affine_cones(m0);
            if (!ac) throw condition_error("no affine cone pair: the renormalization model needs one");
            PiecewiseMap m = normalized(m0);
            json rep;
            rep["reflected"] = m.reflected;
            rep["epsilon"] = m.epsilon;
            rep["lambda"] = ac->lambda;
            auto rr = find_rectangle(m, ac->c_min);
            if (!rr) {
                rep["error"] = "no rectangle with f(R) inside R";
            } else {
                rep["rectangle"] = to_json(rr->R);
                auto R = check_R_conditions(m, *rr);
                rep["R"] = {{"R1", R.R1},         {"R1_margin", R.R1_margin},
                            {"R2_left", R.R2_left}, {"R2_right", R.R2_right},
                            {"R2_lower", R.R2_lower}, {"R2_upper_literal", R.R2_upper_literal},
                            {"R2_upper_alt", R.R2_upper_alt}, {"R3", R.R3},
                            {"R4", R.R4},         {"R4_intervals", R.R4_intervals},
                            {"pass", R.pass},     {"detail", R.detail}};
                auto part = build_partition(m, *rr, std::max(12, rn_max + 2));
                auto rd = first_return(m, part, rn_max, rn_samples, g.seed);
                json strips = json::array();
                for (const auto& s : rd.strips)
                    strips.push_back({{"n", s.n},
                                      {"samples", s.samples},
                                      {"return_ok", s.return_ok},
                                      {"escaped", s.escaped},
                                      {"certificate", s.certificate},
                                      {"T_height", s.T_height},
                                      {"halves_split", s.halves_split}});
                rep["return_map"] = {{"pass", rd.pass}, {"strips", strips}};
                auto ord = verify_ordering(rd, ac->lambda, m.epsilon, rn_max);
                rep["ordering"] = {{"order_pass", ord.order_pass},
                                   {"pairs", ord.pairs},
                                   {"mismatches", ord.mismatches},
                                   {"expected_rank", ord.expected_rank},
                                   {"flip_stated_pass", ord.flip_stated_pass},
                                   {"flip_corrected_pass", ord.flip_corrected_pass},
                                   {"flip_observed", ord.flip_observed}};
                auto th = verify_theta(m, part, theta_i, theta_m, ac->lambda);
                rep["theta"] = {{"pass", th.pass},
                                {"table", th.theta},
                                {"sign_checks", th.sign_checks},
                                {"sign_failures", th.sign_failures},
                                {"contraction_checks", th.contraction_checks},
                                {"contraction_failures", th.contraction_failures},
                                {"worst_ratio", th.worst_ratio}};
                std::cout << "R " << (R.pass ? "PASS" : "FAIL") << "  return " << (rd.pass ? "PASS" : "FAIL")
                          << "  ordering " << (ord.order_pass ? "PASS" : "FAIL") << "  theta "
                          << (th.pass ? "PASS" : "FAIL") << "\n";
                SvgPlot plot;
                plot.title = g.family + " " + params_string(m.params) + ": R, C_n (blue), U_n (red)";
                SvgLayer lr{{}, {}, {rr->loop}, "#000"};
                SvgLayer lc, lu;
                lc.color = "#36c";
                lu.color = "#c33";
                for (const auto& s : rd.strips) {
                    lc.loops.push_back(s.C);
                    lu.loops.push_back(s.U);
                }
                plot.layers = {lr, lc, lu};
                save(g, rn_plot, render_svg(plot));
            }
            save_json(g, rn_out, "renorm_report", rep);
        } else if (*tan) {
            Params base = g.params.empty() ? Params{} : parse_params(g.params);
            ParamFamily fam = family_by_name(g.family);
            for (const auto& n : fam.param_names)
                if (!base.count(n)) base[n] = fam.instantiate(base).params.at(n);
            auto L = trace_tangency(fam, t_index, {base, t_param, t_lo, t_hi}, t_slide, t_steps, t_step, t_m0);
            std::cout << L.vertices.size() << " vertices, stop: " << L.stop_reason << "\n";
            save_json(g, t_out, "tangency_locus", to_json(L));
            std::string csv = t_param + "," + t_slide + ",offset,tower_height,cone_coefficient,lambda\n";
            char buf[256];
            for (const auto& v : L.vertices) {
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.3e,%.17g,%.17g,%.17g\n", v.mu.at(t_param),
                              v.mu.at(t_slide), v.offset, v.tower_height, v.cone_coefficient, v.lambda);
                csv += buf;
            }
            save(g, t_csv, csv);
            SvgPlot plot;
            plot.title = "gamma_" + std::to_string(t_index) + " tangency locus in (" + t_param + ", " + t_slide + ")";
            SvgLayer l;
            Polyline pl;
            for (const auto& v : L.vertices) pl.push_back({v.mu.at(t_param), v.mu.at(t_slide)});
            l.lines = {pl};
            l.points = pl;
            l.radius = 2;
            l.color = "#c33";
            plot.layers = {l};
            save(g, t_plot, render_svg(plot));
        } else if (*man) {
            auto ext = std::filesystem::path(m_out).extension().string();
            if (ext != ".json" && ext != ".svg" && ext != ".csv") throw usage_error("--out must end in .json, .svg or .csv");
            PiecewiseMap m = load_map(g);
            auto fp = fixed_points(m);
            auto ac = m.affine() ? synthesize_affine_cones(m) : std::nullopt;
            UniversalConePair k = ac ? ac->u.universal : UniversalConePair{};
            auto loc = local_manifolds(m, fp, k);
            json rep;
            rep["X"] = {fp.X.z.x, fp.X.z.y};
            std::vector<Polyline> all;
            SvgPlot plot;
            plot.title = g.family + " " + params_string(m.params) + ": W^u(X) (red), W^s(X) (blue)";
            if (m_side != "stable") {
                auto wu = grow_unstable(m, loc.unstable, gen_u, m_budget);
                auto ls = wu.polylines();
                rep["unstable"] = {{"generations", wu.generation},
                                   {"pieces", ls.size()},
                                   {"length", wu.total_length()},
                                   {"valid", wu.valid},
                                   {"truncated", wu.truncated}};
                SvgLayer l;
                l.lines = ls;
                l.color = "#c33";
                l.width = 0.5;
                plot.layers.push_back(l);
                all.insert(all.end(), ls.begin(), ls.end());
            }
            if (m_side != "unstable") {
                Loop region;
                std::string source;
                double h = resolution_h(m, 1, source);
                if (ac && source == "rectangle") {
                    region = find_rectangle(normalized(m), ac->c_min)->loop;
                    if (m.affine() && normalized(m).reflected)
                        for (auto& p : region) p.y = -p.y;
                } else {
                    BBox b{fp.X.z - Vec2{h, h}, fp.X.z + Vec2{h, h}};
                    region = box_loop(b);
                }
                auto ws = grow_stable(m, loc.stable, region, gen_s, m_budget);
                auto ls = ws.polylines();
                rep["stable"] = {{"generations", ws.generation},
                                 {"pieces", ls.size()},
                                 {"length", ws.total_length()},
                                 {"valid", ws.valid},
                                 {"truncated", ws.truncated}};
                SvgLayer l;
                l.lines = ls;
                l.color = "#36c";
                l.width = 0.5;
                plot.layers.push_back(l);
                all.insert(all.end(), ls.begin(), ls.end());
            }
            std::cout << all.size() << " pieces\n";
            if (ext == ".svg") {
                save(g, m_out, render_svg(plot));
            } else if (ext == ".csv") {
                save(g, m_out, polylines_csv(all));
            } else {
                rep["budget"] = m_budget;
                json pieces = json::array();
                for (const auto& l : all) {
                    json pl = json::array();
                    for (auto p : l) pl.push_back({p.x, p.y});
                    pieces.push_back(pl);
                }
                rep["pieces"] = pieces;
                save_json(g, m_out, "manifold", rep);
            }
        } else if (*attc) {
            PiecewiseMap m = load_map(g);
            auto run = run_attractor(m, a_n, a_res);
            json rep;
            rep["h"] = run.h;
            rep["h_source"] = run.h_source;
            rep["G"] = {{"method", run.G.method}, {"regions", run.G.regions.size()}, {"trapping", to_json(run.G.trapping)}};
            bool nested = true;
            for (std::size_t i = 1; i < run.att.nested.size(); ++i) nested = nested && run.att.nested[i];
            rep["cover"] = {{"n", a_n},
                            {"points", run.att.points.size()},
                            {"boxes", run.att.boxes.size()},
                            {"sizes", run.att.cover_sizes},
                            {"nested", nested},
                            {"boundary_generations", run.att.boundary_generations},
                            {"forward_invariant", forward_invariant(m, run.att)}};
            std::cout << "G " << run.G.method << " " << to_string(run.G.trapping.verdict) << ", "
                      << run.att.boxes.size() << " boxes, nested " << (nested ? "yes" : "no") << "\n";
            if (a_haus) {
                auto fp = fixed_points(m);
                auto ac = m.affine() ? synthesize_affine_cones(m) : std::nullopt;
                auto loc = local_manifolds(m, fp, ac ? ac->u.universal : UniversalConePair{});
                auto wu = grow_unstable(m, loc.unstable, a_wu);
                auto hd = hausdorff_attractor_vs_unstable(run.att, wu);
                rep["hausdorff"] = to_json(hd);
                rep["hausdorff"]["in_h"] = hd.distance / run.h;
                std::cout << "Hausdorff " << hd.distance << " (" << hd.distance / run.h << " h)\n";
            }
            if (a_mix) {
                auto mx = mixing_matrix(m, run.att);
                rep["mixing"] = to_json(mx);
                std::cout << "mixing " << to_string(mx.verdict) << "\n";
            }
            save(g, a_out, points_csv(run.att.points));
            SvgPlot plot;
            plot.title = g.family + " " + params_string(m.params) + ": f^" + std::to_string(a_n) + "(G)";
            plot.point_cap = a_cap;
            SvgLayer lg, lp;
            for (const auto& r : run.G.regions) lg.loops.push_back(r.boundary);
            lg.color = "#36c";
            lp.points = run.att.points;
            lp.radius = 0.4;
            plot.layers = {lg, lp};
            save(g, a_plot, render_svg(plot));
            save_json(g, a_json, "attractor_report", rep);
        } else if (*basin) {
            PiecewiseMap m = load_map(g);
            BBox box = parse_box(b_box);
            auto run = run_attractor(m, b_n, b_res);
            auto be = basin_fraction(m, run.att, region_from_loop(box_loop(box)), b_samples, b_horizon, g.seed,
                                     b_threads);
            json rep = to_json(be);
            rep["box"] = b_box;
            std::cout << "fraction " << be.fraction_converging << " +- " << be.std_error << "\n";
            save_json(g, b_out, "basin_estimate", rep);
        }
    } catch (const io_error& e) {
        std::cerr << "lozilab: " << e.what() << "\n";
        return 2;
    } catch (const usage_error& e) {
        std::cerr << "lozilab: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "lozilab: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        // the computation ran and could not conclude; report, not a usage or I/O failure
        std::cerr << "lozilab: " << e.what() << "\n";
        return 0;
    }
    return 0;
}
