#include <cmath>

#include "doctest.h"
#include "lozilab/manifolds.hpp"
#include "lozilab/renorm.hpp"

using namespace lozi;

namespace {
struct LoziSetup {
    PiecewiseMap m = make_lozi(1.9, 0.1);
    AffineCones ac = *synthesize_affine_cones(m);
    FixedPointData fp = fixed_points(m);
    LocalManifolds loc = local_manifolds(m, fp, ac.u.universal);
};

double dist_to_pieces(Vec2 p, const ManifoldApprox& man) {
    double d = INFINITY;
    for (const auto& c : man.pieces) d = std::min(d, dist_to_polyline(p, c.samples, false));
    return d;
}
}  // namespace

TEST_CASE("local manifolds of X follow the eigenlines") {
    LoziSetup s;
    double a = 1.9, b = 0.1;
    double mu_u = (-a - std::sqrt(a * a + 4 * b)) / 2, mu_s = (-a + std::sqrt(a * a + 4 * b)) / 2;
    CHECK(mu_u == doctest::Approx(-1.95124).epsilon(1e-5));
    CHECK(mu_s == doctest::Approx(0.05124).epsilon(1e-3));
    CHECK(mu_u * mu_s == doctest::Approx(-b));
    // (x, y) on W^u_loc(X): y - X.y = (b / mu_u)(x - X.x)
    REQUIRE_FALSE(s.loc.unstable.pieces.empty());
    for (const auto& c : s.loc.unstable.pieces)
        for (auto p : c.samples) CHECK(std::abs((p.y - s.fp.X.z.y) - b / mu_u * (p.x - s.fp.X.z.x)) < 1e-12);
    REQUIRE_FALSE(s.loc.stable.pieces.empty());
    for (const auto& c : s.loc.stable.pieces)
        for (auto p : c.samples) CHECK(std::abs((p.y - s.fp.X.z.y) - b / mu_s * (p.x - s.fp.X.z.x)) < 1e-12);
}

TEST_CASE("one generation inside R_+ stretches by at least lambda") {
    LoziSetup s;
    MonotoneCurve seg = make_curve(Orientation::U, {{0.2, 0.0}, {0.3, 0.001}}, 1.0);
    ManifoldApprox seed;
    seed.base = s.fp.X;
    seed.pieces = {seg};
    seed.governing = s.ac.u.at({0, 0});
    auto g1 = grow_unstable(s.m, seed, 1);
    REQUIRE(g1.pieces.size() == 1);
    CHECK(g1.total_length() >= s.ac.lambda * seg.length() - 1e-12);
    MonotoneCurve cross = make_curve(Orientation::U, {{-0.1, 0.0}, {0.1, 0.002}}, 1.0);
    seed.pieces = {cross};
    CHECK(grow_unstable(s.m, seed, 1).pieces.size() == 2);
}

TEST_CASE("unstable growth: piece count, cone validity and forward invariance") {
    LoziSetup s;
    std::size_t n0 = s.loc.unstable.pieces.size();
    ManifoldApprox prev = s.loc.unstable;
    for (int n = 1; n <= 8; ++n) {
        auto w = grow_unstable(s.m, s.loc.unstable, n);
        CHECK(w.valid);
        // a piece splits at most once per divider crossing
        CHECK(w.pieces.size() <= 2 * std::max<std::size_t>(prev.pieces.size(), 1) + n0);
        // f(W^u_{n-1}) lies on W^u_n
        for (const auto& c : prev.pieces)
            for (std::size_t i = 0; i < c.samples.size(); i += 7) CHECK(dist_to_pieces(s.m(c.samples[i]), w) < 1e-9);
        prev = w;
    }
}

TEST_CASE("arc bound is diam R over alpha_u") {
    auto seg = make_curve(Orientation::U, {{0, 0}, {2, 0}}, 1.0);
    auto r = arc_bound_check(seg, 1.0, 2.0);
    CHECK(r.pass);
    CHECK(r.bound == doctest::Approx(2.0));
    CHECK(arc_bound_check(seg, 0.8, 2.0).bound == doctest::Approx(2.5));
    auto longer = make_curve(Orientation::U, {{0, 0}, {3, 0}}, 1.0);
    CHECK_FALSE(arc_bound_check(longer, 1.0, 2.0).pass);
}

TEST_CASE("stable pull-backs of beta_1 reproduce beta_2 and gamma_1") {
    LoziSetup s;
    auto g = normalized(s.m);
    std::vector<SLine> beta, gamma;
    build_lines(g, 3, beta, gamma);
    // beta_1 is W^s(Y) on the left; pull it back by both branches
    auto line_curve = [](const SLine& l) {
        std::vector<Vec2> pts;
        for (int i = 0; i <= 20; ++i) {
            double y = -0.3 + 0.6 * i / 20;
            pts.push_back({l.x_at(y), y});
        }
        return make_curve(Orientation::S, pts, 1.0);
    };
    auto b1 = line_curve(beta[0]);
    auto minus = pull_back(g, Side::MINUS, b1, 10.0);
    auto plus = pull_back(g, Side::PLUS, b1, 10.0);
    REQUIRE_FALSE(minus.empty());
    REQUIRE_FALSE(plus.empty());
    for (auto p : minus[0].samples) CHECK(std::abs(beta[1].side(p)) < 1e-9);
    for (auto p : plus[0].samples) CHECK(std::abs(gamma[0].side(p)) < 1e-9);
}

TEST_CASE("stable pieces converge to X under iteration and map back into the source") {
    LoziSetup s;
    auto rr = find_rectangle(s.m, s.ac.c_min);
    REQUIRE(rr);
    auto ws = grow_stable(s.m, s.loc.stable, rr->loop, 4);
    CHECK(ws.valid);
    for (const auto& c : ws.pieces) {
        Vec2 z = c.samples[c.samples.size() / 2];
        double d0 = norm(z - s.fp.X.z);
        for (int k = 0; k < 30; ++k) z = s.m(z);
        CHECK(norm(z - s.fp.X.z) < 1e-6 + d0 * 1e-6);
    }
    // one pull-back step: its forward image lies on the source curve
    for (const auto& c : s.loc.stable.pieces)
        for (Side side : {Side::MINUS, Side::PLUS})
            for (const auto& p : pull_back(s.m, side, c, 10.0))
                for (auto z : p.samples) CHECK(dist_to_polyline(s.m(z), c.samples, false) < 1e-8);
}

TEST_CASE("density gap shrinks with the length budget") {
    LoziSetup s;
    auto rr = find_rectangle(s.m, s.ac.c_min);
    REQUIRE(rr);
    BBox w = bbox_of(rr->loop);
    double prev = INFINITY;
    for (double budget : {50.0, 100.0, 200.0}) {
        auto ws = grow_stable(s.m, s.loc.stable, rr->loop, 40, budget);
        CHECK(ws.total_length() <= budget + 1e-9);
        auto d = density_report(ws, w, 40);
        CHECK(d.max_gap < prev);
        prev = d.max_gap;
    }
    auto one = density_report(s.loc.stable, w, 1);
    CHECK(std::isfinite(one.max_gap));
    CHECK(one.cells == 1);
}

TEST_CASE("crossing witness on an arc through beta_1") {
    LoziSetup s;
    auto rr = find_rectangle(s.m, s.ac.c_min);
    REQUIRE(rr);
    auto ws = grow_stable(s.m, s.loc.stable, rr->loop, 6);
    // short horizontal arc around a point of the stable approximation
    Vec2 z = ws.pieces.front().samples[ws.pieces.front().samples.size() / 2];
    auto arc = make_curve(Orientation::U, {z - Vec2{1e-3, 0}, z + Vec2{1e-3, 0}}, 1.0);
    auto w = crossing_witness(s.m, ws, arc);
    REQUIRE(w.point);
    CHECK(w.generations == 0);
    // a tiny arc away from it needs iterations before the first fold
    auto tiny = make_curve(Orientation::U, {{0.9, -0.05}, {0.9 + 1e-4, -0.05}}, 1.0);
    auto w2 = crossing_witness(s.m, ws, tiny);
    CHECK((w2.point.has_value() || !w2.diagnostic.empty()));
}
