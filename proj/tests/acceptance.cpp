#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "lozilab/attractor.hpp"
#include "lozilab/emit.hpp"
#include "lozilab/manifolds.hpp"
#include "lozilab/renorm.hpp"
#include "lozilab/scanlab.hpp"

using namespace lozi;

namespace {
struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void run(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool ok = o.pass && t < limit_s;
    if (!ok) ++failures;
    std::printf("%s %2d %s [%.2fs < %.0fs] %s\n", ok ? "PASS" : "FAIL", id, name, t, limit_s, o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Lozi {
    PiecewiseMap m = make_lozi(1.9, 0.1);
    AffineCones ac = *synthesize_affine_cones(m);
    RenormRect rr = *find_rectangle(m, ac.c_min);
    double h = rr.R.diam() / 1024;
};

Outcome cones() {
    double a = 1.9, b = 0.1;
    auto m = make_lozi(a, b);
    auto ac = synthesize_affine_cones(m);
    if (!ac) return {false, "no cones"};
    double c_min = (a - std::sqrt(a * a - 4 * b)) / 2;
    double exact = std::sqrt((a - c_min) * (a - c_min) + b * b) / std::sqrt(1 + c_min * c_min);
    double lower = (a - c_min) / std::sqrt(1 + c_min * c_min);
    auto inv = verify_invariance(m, ac->u, ac->s, 100000, {}, 1);
    auto ex = verify_expansion(m, ac->u, ac->s, std::sqrt(2.0), 100000, {}, 1);
    bool ok = std::abs(ac->c_min - c_min) < 1e-9 && std::abs(c_min - 0.0542) < 5e-5 &&
              std::abs(ac->lambda - exact) < 1e-9 && std::abs(lower - 1.843) < 5e-4 && ac->lambda >= lower &&
              ac->lambda > std::sqrt(2.0) && inv.pass && inv.invariance_failures.empty() && ex.pass &&
              std::abs(ex.lambda_estimate - ac->lambda) < 1e-9;
    return {ok, fmt("c_min=%.6f lambda=%.6f (closed form %.6f, b-free lower bound %.6f) sampled=%.12f inv_fail=%zu", ac->c_min,
                    ac->lambda, exact, lower, ex.lambda_estimate, inv.invariance_failures.size())};
}

Outcome graph_lemma() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0, 1);
    int accepted = 0, rejected = 0, bound_ok = 0;
    for (int k = 0; k < 1000; ++k) {
        double l = 0.1 + 0.85 * U(rng);
        double bound = std::sqrt(1 - l * l) / l;
        bool u = k % 2 == 0;
        Cone gov{u ? Vec2{1, 0} : Vec2{0, 1}, l};
        int n = 20 + static_cast<int>(U(rng) * 80);
        std::vector<Vec2> pts{{0, 0}};
        for (int i = 0; i < n; ++i) {
            double dt = 0.01 + U(rng);
            double ds = (2 * U(rng) - 1) * bound * 0.999 * dt;
            Vec2 q = pts.back();
            pts.push_back(u ? Vec2{q.x + dt, q.y + ds} : Vec2{q.x + ds, q.y + dt});
        }
        auto good = make_curve(u ? Orientation::U : Orientation::S, pts, bound);
        auto r = validate_curve(good, gov);
        accepted += r.valid;
        bound_ok += std::abs(r.bound - bound) < 1e-12 * bound && r.max_slope <= bound;
        // steepen one random segment past the bound
        std::size_t j = 1 + static_cast<std::size_t>(U(rng) * n);
        if (j > static_cast<std::size_t>(n)) j = static_cast<std::size_t>(n);
        double dt = u ? pts[j].x - pts[j - 1].x : pts[j].y - pts[j - 1].y;
        double ds = bound * (1.001 + U(rng)) * dt * (U(rng) < 0.5 ? -1 : 1);
        Vec2 shift = (u ? Vec2{pts[j - 1].x + dt, pts[j - 1].y + ds} : Vec2{pts[j - 1].x + ds, pts[j - 1].y + dt}) - pts[j];
        for (std::size_t i = j; i < pts.size(); ++i) pts[i] = pts[i] + shift;
        auto bad = make_curve(u ? Orientation::U : Orientation::S, pts, bound);
        rejected += !validate_curve(bad, gov).valid;
    }
    return {accepted == 1000 && rejected == 1000 && bound_ok == 1000,
            fmt("valid accepted %d/1000, bound matches %d/1000, perturbed rejected %d/1000", accepted, bound_ok, rejected)};
}

Outcome renorm_structure(const PiecewiseMap& m0, int n_max, bool theta, bool flip) {
    auto ac = synthesize_affine_cones(m0);
    if (!ac) return {false, "no cones"};
    auto m = normalized(m0);
    auto rr = find_rectangle(m, ac->c_min);
    if (!rr) return {false, "no rectangle"};
    auto R = check_R_conditions(m, *rr);
    auto part = build_partition(m, *rr, 12);
    auto rd = first_return(m, part, n_max, 1000, 1);
    int certs = 0;
    for (const auto& s : rd.strips) certs += s.certificate && s.return_ok == s.samples && s.samples == 1000;
    auto o = verify_ordering(rd, ac->lambda, m.epsilon, n_max);
    bool ok = R.pass && certs == n_max - 1 && o.order_pass;
    std::string d = fmt("eps=%+d R1-R4=%s certificates %d/%d ordering %s (%d pairs)", m.epsilon, R.pass ? "pass" : "fail",
                        certs, n_max - 1, o.order_pass ? "pass" : "fail", o.pairs);
    if (flip) {
        ok = ok && o.flip_stated_pass && o.flip_corrected_pass;
        d += fmt(" flip %s", o.flip_stated_pass && o.flip_corrected_pass ? "pass" : "fail");
    }
    if (theta) {
        auto th = verify_theta(m, part, 4, 8, ac->lambda);
        ok = ok && th.sign_failures == 0 && th.contraction_failures == 0 && th.worst_ratio <= 1 + 1e-6;
        d += fmt(" theta sign %d/%d contraction %d/%d worst ratio %.5f", th.sign_checks - th.sign_failures, th.sign_checks,
                 th.contraction_checks - th.contraction_failures, th.contraction_checks, th.worst_ratio);
    }
    return {ok, d};
}

Outcome density() {
    Lozi s;
    auto fp = fixed_points(s.m);
    auto loc = local_manifolds(s.m, fp, s.ac.u.universal);
    auto orbit = attractor_from_orbit(s.m, fp.X.z + 1e-6 * fp.X.v_u, 200000, grid_for({}, s.h));
    BBox w = bbox_of(orbit.points);
    std::string d;
    double prev = INFINITY, diag = 0;
    bool monotone = true, below = false;
    for (double budget : {50.0, 100.0, 200.0, 400.0}) {
        auto ws = grow_stable(s.m, loc.stable, s.rr.loop, 40, budget);
        auto r = density_report(ws, w, 100, orbit.points);
        diag = r.cell_diag;
        if (budget > 50) monotone = monotone && r.max_gap < prev;
        below = below || r.max_gap < r.cell_diag;
        prev = r.max_gap;
        d += fmt("L=%g:%.5f ", budget, r.max_gap);
    }
    return {monotone && below, d + fmt("cell diagonal %.5f", diag)};
}

Outcome hausdorff() {
    Lozi s;
    auto G = make_G(s.m, s.h);
    auto att = iterate_region(s.m, G.regions[0], 60, grid_for({}, s.h));
    auto fp = fixed_points(s.m);
    auto loc = local_manifolds(s.m, fp, s.ac.u.universal);
    auto wu = grow_unstable(s.m, loc.unstable, 12);
    auto hr = hausdorff_attractor_vs_unstable(att, wu);
    return {hr.distance < 2 * s.h, fmt("h=%.6f d_H=%.6f (%.3f h) cover->W^u %.6f W^u->cover %.6f", s.h, hr.distance,
                                        hr.distance / s.h, hr.cover_to_wu, hr.wu_to_cover)};
}

Outcome trapping_chain() {
    Lozi s;
    auto g = grid_for({}, s.h);
    auto G = make_G(s.m, s.h);
    auto att = iterate_region(s.m, G.regions[0], 60, g);
    bool nested = true;
    for (std::size_t n = 1; n < att.nested.size(); ++n) nested = nested && att.nested[n];
    auto V = construct_V(s.m, {G.regions[0].boundary}, g);
    bool ok = G.trapping.pass() && nested && V.ok && V.trapping.pass() && V.inside_H;
    std::string d = fmt("G %s margin %.3g; covers nested %s; V with H = G: p=%d f(cl V) in V %s (margin %.3g) V in H %s",
                        G.method.c_str(), G.trapping.margin, nested ? "yes" : "no", V.p, V.trapping.pass() ? "yes" : "no",
                        V.trapping.margin, V.inside_H ? "yes" : "no");
    // towers of the triangle model on the orientation preserving instance are not closed
    auto gm = normalized(family_by_name("bcnf_sym").instantiate({{"a", 1.9}, {"delta", 0.1}}));
    std::vector<SLine> beta, gamma;
    build_lines(gm, 12, beta, gamma);
    auto tm = build_triangle(gm, gamma);
    auto tg = grid_for({}, 2.375 / 1024);
    auto VT = construct_V(gm, forward_union(gm, tm.H0, tg), tg, 12);
    d += fmt("; tower H: V %s (%s)", VT.ok ? "ok" : "not built", VT.detail.c_str());
    return {ok, d};
}

Outcome mixing() {
    Lozi s;
    auto G = make_G(s.m, s.h);
    auto att = iterate_region(s.m, G.regions[0], 60, grid_for({}, s.h));
    auto mx = mixing_matrix(s.m, att, 64);
    auto rot = make_rotation(2 * M_PI * (std::sqrt(5.0) - 1) / 2);
    auto ar = attractor_from_orbit(rot, {1, 0}, 100000, grid_for({}, 0.02), 0);
    auto mr = mixing_matrix(rot, ar, 64);
    bool ok = mx.verdict == MixingVerdict::MIXING_CONSISTENT && mx.positive_power > 0 && mx.positive_power <= 64 &&
              mr.verdict == MixingVerdict::TRANSITIVE_CONSISTENT;
    return {ok, fmt("Lozi %s (%zu boxes, M^%d > 0); rotation %s", to_string(mx.verdict).c_str(), mx.nodes,
                    mx.positive_power, to_string(mr.verdict).c_str())};
}

Outcome tangency() {
    auto fam = family_by_name("bcnf_sym");
    Params base{{"a", 1.9}, {"delta", 0.2}};
    auto roots = tangency_curve(fam, base, "a", 1.4, 1.7, 3, 80, 1e-13);
    if (roots.empty() || std::abs(roots.front().offset) >= 1e-9) return {false, "no root on the slice"};
    auto L = trace_tangency(fam, 3, {base, "a", 1.4, 1.7}, "delta", 60, 0.01);
    std::size_t n = L.vertices.size();
    int verified = 0;
    for (const auto& v : L.vertices)
        verified += std::abs(gamma_offset(normalized(fam.instantiate(v.mu)), 3)) < 1e-9;
    bool shrinking = n >= 6;
    for (std::size_t k = n >= 5 ? n - 4 : 1; shrinking && k < n; ++k)
        shrinking = L.vertices[k].tower_height < L.vertices[k - 1].tower_height;
    bool ok = n >= 21 && verified == static_cast<int>(n) && shrinking;
    return {ok, fmt("root a=%.10f offset %.1e; %zu steps, %d/%zu re-verified; tower height %.4g -> %.4g; stop: %s",
                    roots.front().mu, roots.front().offset, n ? n - 1 : 0, verified, n,
                    n ? L.vertices.front().tower_height : 0.0, n ? L.vertices.back().tower_height : 0.0,
                    L.stop_reason.c_str())};
}

Outcome determinism() {
    ScanConfig c;
    c.family = "lozi";
    c.axes = {{"a", 1.6, 1.95, 3}, {"b", 0.05, 0.3, 3}};
    c.budgets.cone_samples = 2000;
    c.budgets.resolution = 128;
    c.budgets.n_max = 4;
    c.budgets.strip_samples = 100;
    c.budgets.seed = 11;
    auto dir = std::filesystem::temp_directory_path() / "lozilab_acceptance";
    std::string out[2];
    for (int r = 0; r < 2; ++r) {
        c.threads = r == 0 ? 1 : 4;
        auto recs = scan_grid(c);
        auto base = (dir / ("run" + std::to_string(r))).string();
        write_text(base + "/scan.csv", records_csv(recs));
        write_text(base + "/scan.json", records_json(recs).dump(2));
        write_text(base + "/scan.svg", parameter_map_svg(recs, "a", "b", {"L1", "L3"}));
        out[r] = read_text(base + "/scan.csv") + read_text(base + "/scan.json") + read_text(base + "/scan.svg");
    }
    std::filesystem::remove_all(dir);
    return {out[0] == out[1] && !out[0].empty(), fmt("csv+json+svg %zu bytes, identical across runs", out[0].size())};
}
}  // namespace

int main() {
    run(1, "cone certification", 5, cones);
    run(2, "graph lemma", 5, graph_lemma);
    run(3, "renormalization structure", 60, [] {
        return renorm_structure(family_by_name("bcnf_sym").instantiate({{"a", 1.9}, {"delta", 0.1}}), 8, true, true);
    });
    run(4, "orientation-reversing ordering", 60, [] { return renorm_structure(make_lozi(1.9, 0.1), 6, false, false); });
    run(5, "density of W^s(X)", 120, density);
    run(6, "attractor vs closure of W^u(X)", 120, hausdorff);
    run(7, "trapping chain", 60, trapping_chain);
    run(8, "mixing proxy", 60, mixing);
    run(9, "tangency locus", 180, tangency);
    run(10, "determinism", 30, determinism);
    return failures ? 1 : 0;
}
