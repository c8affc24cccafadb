#include <cmath>

#include "doctest.h"
#include "lozilab/attractor.hpp"
#include "lozilab/renorm.hpp"

using namespace lozi;

namespace {
Loop square(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

PiecewiseMap linear(const Mat2& A, Vec2 t) { return make_affine(A, t, A, t, 0, 0); }

struct LoziCoarse {
    PiecewiseMap m = make_lozi(1.9, 0.1);
    double h = 2.27706 / 256;
    GResult G = make_G(m, h);
};
}  // namespace

TEST_CASE("huge box around a dissipative affine map traps with the computed margin") {
    // f(z) = z/2 + (1, 0): image of [-10,10]^2 is [-4,6] x [-5,5]
    auto m = linear({0.5, 0, 0, 0.5}, {1, 0});
    auto r = verify_trapping(m, region_from_loop(square(-10, -10, 10, 10)));
    CHECK(r.pass());
    CHECK(r.margin == doctest::Approx(4.0));
}

TEST_CASE("expanding and touching maps do not trap") {
    auto grow = linear({2, 0, 0, 2}, {0, 0});
    CHECK(verify_trapping(grow, region_from_loop(square(-1, -1, 1, 1))).verdict == Verdict::FAIL);
    auto id = linear({1, 0, 0, 1}, {0, 0});
    auto r = verify_trapping(id, region_from_loop(square(-1, -1, 1, 1)));
    CHECK(r.verdict == Verdict::INDETERMINATE);
    CHECK(std::abs(r.margin) < 1e-9);
}

TEST_CASE("the image of a trapping region traps, margin scaled by the singular values") {
    Mat2 A{0.5, 0.2, -0.1, 0.4};
    auto m = linear(A, {0.3, 0.1});
    auto U = region_from_loop(square(-3, -3, 3, 3));
    auto r0 = verify_trapping(m, U);
    REQUIRE(r0.pass());
    auto fU = region_from_loop(image_loop(m, U.boundary));
    auto r1 = verify_trapping(m, fU);
    CHECK(r1.pass());
    // boundaries of f(U) and f^2(U) are the images of those of U and f(U)
    double p = A.a * A.a + A.b * A.b + A.c * A.c + A.d * A.d, q = std::abs(A.det());
    double smax = std::sqrt((p + std::sqrt(p * p - 4 * q * q)) / 2), smin = q / smax;
    CHECK(r1.margin >= smin * r0.margin - 1e-12);
    CHECK(r1.margin <= smax * r0.margin + 1e-12);
}

TEST_CASE("Lozi turn region is trapping and meets both sides of the divider") {
    LoziCoarse s;
    REQUIRE(s.G.trapping.pass());
    CHECK(s.G.method == "turns");
    REQUIRE(s.G.regions.size() == 1);
    bool left = false, right = false;
    for (auto p : s.G.regions[0].boundary) {
        left |= p.x < 0;
        right |= p.x > 0;
    }
    CHECK((left && right));
    auto ac = synthesize_affine_cones(s.m);
    auto L = check_L_conditions(s.m, ac, s.G);
    CHECK(L.L1 == Verdict::PASS);
    CHECK(L.L2 == Verdict::PASS);
    CHECK(L.L3 == Verdict::PASS);
    CHECK(L.L4 == Verdict::PASS);
    CHECK(L.L4_components == 3);
    CHECK(L.det_max == doctest::Approx(0.1));
}

TEST_CASE("iterated region: n = 0 is F, covers shrink and stay nested") {
    LoziCoarse s;
    auto g = grid_for({}, s.h);
    auto a0 = iterate_region(s.m, s.G.regions[0], 0, g);
    CHECK(is_subset(rasterize_loop(g, s.G.regions[0].boundary), a0.boxes));
    auto a = iterate_region(s.m, s.G.regions[0], 40, g);
    for (std::size_t n = 1; n < a.nested.size(); ++n) CHECK(a.nested[n]);
    for (std::size_t n = 2; n < a.cover_sizes.size(); ++n) CHECK(a.cover_sizes[n] <= a.cover_sizes[1]);
    CHECK(forward_invariant(s.m, a));
    auto b = iterate_region(s.m, s.G.regions[0], 60, g);
    CHECK(is_subset(b.boxes, dilate(g, a.boxes, 1)));
    CHECK(is_subset(a.boxes, dilate(g, b.boxes, 1)));
}

TEST_CASE("cover against W^u(X) at coarse resolution") {
    LoziCoarse s;
    auto g = grid_for({}, s.h);
    auto att = iterate_region(s.m, s.G.regions[0], 40, g);
    auto ac = synthesize_affine_cones(s.m);
    auto fp = fixed_points(s.m);
    auto loc = local_manifolds(s.m, fp, ac->u.universal);
    auto h8 = hausdorff_attractor_vs_unstable(att, grow_unstable(s.m, loc.unstable, 8));
    auto h12 = hausdorff_attractor_vs_unstable(att, grow_unstable(s.m, loc.unstable, 12));
    CHECK(h12.distance < 2 * s.h);
    CHECK(h8.distance < 2 * s.h);
    CHECK(h12.distance == doctest::Approx(std::max(h12.cover_to_wu, h12.wu_to_cover)));
}

TEST_CASE("mixing proxy: Lozi is primitive, swaps and rotations are not") {
    LoziCoarse s;
    auto g = grid_for({}, s.h);
    auto att = iterate_region(s.m, s.G.regions[0], 40, g);
    auto mx = mixing_matrix(s.m, att);
    CHECK(mx.verdict == MixingVerdict::MIXING_CONSISTENT);
    CHECK(mx.positive_power > 0);
    CHECK(mx.positive_power <= 64);

    // attracting 2-cycle (1,0) <-> (-1,0): permutation matrix, never positive
    auto swap = linear({-1, 0, 0, 0.5}, {0, 0});
    auto a2 = attractor_from_orbit(swap, {1, 0.3}, 2000, grid_for({}, 0.1), 100);
    CHECK(a2.boxes.size() == 2);
    auto m2 = mixing_matrix(swap, a2);
    CHECK(m2.strongly_connected);
    CHECK(m2.verdict == MixingVerdict::TRANSITIVE_CONSISTENT);

    // a single attracting fixed point is not mixing-consistent either
    auto point = linear({0.3, 0, 0, 0.3}, {0.05, 0.05});
    auto a1 = attractor_from_orbit(point, {1, 1}, 500, grid_for({}, 0.1), 100);
    CHECK(mixing_matrix(point, a1).verdict != MixingVerdict::MIXING_CONSISTENT);

    auto rot = make_rotation(2 * M_PI * (std::sqrt(5.0) - 1) / 2);
    auto ar = attractor_from_orbit(rot, {1, 0}, 100000, grid_for({}, 0.02), 0);
    CHECK(mixing_matrix(rot, ar).verdict == MixingVerdict::TRANSITIVE_CONSISTENT);
}

TEST_CASE("basin fraction: inside, far outside and straddling") {
    LoziCoarse s;
    auto g = grid_for({}, s.h);
    auto att = iterate_region(s.m, s.G.regions[0], 40, g);
    auto in = basin_fraction(s.m, att, s.G.regions[0], 2000, 500, 3);
    CHECK(in.fraction_converging == 1.0);
    CHECK(in.std_error == 0.0);
    auto far = basin_fraction(s.m, att, region_from_loop(square(10, 10, 12, 12)), 2000, 500, 3);
    CHECK(far.fraction_converging == 0.0);
    auto mid = basin_fraction(s.m, att, region_from_loop(square(-2, -1, 2, 1)), 10000, 1000, 3);
    CHECK(mid.fraction_converging > 0.0);
    CHECK(mid.fraction_converging < 1.0);
    double p = mid.fraction_converging;
    CHECK(mid.std_error == doctest::Approx(std::sqrt(p * (1 - p) / 10000)).epsilon(1e-9));
    // one generator, one answer
    auto again = basin_fraction(s.m, att, region_from_loop(square(-2, -1, 2, 1)), 10000, 1000, 3, 3);
    CHECK(again.fraction_converging == mid.fraction_converging);
}

TEST_CASE("V built on H = G traps, sits in H and covers the attractor") {
    LoziCoarse s;
    auto g = grid_for({}, s.h);
    auto V = construct_V(s.m, {s.G.regions[0].boundary}, g);
    REQUIRE(V.ok);
    CHECK(V.trapping.pass());
    CHECK(V.inside_H_exact);
    CHECK(V.inside_H);
    auto att = iterate_region(s.m, s.G.regions[0], 40, g);
    std::size_t outside = 0;
    for (std::size_t i = 0; i < att.points.size(); i += 13) {
        bool in = false;
        for (const auto& r : V.regions) in = in || region_contains(r, att.points[i], s.h);
        outside += !in;
    }
    CHECK(outside == 0);
}

TEST_CASE("forward union of the triangle towers is not closed under f") {
    auto g = normalized(family_by_name("bcnf_sym").instantiate({{"a", 1.9}, {"delta", 0.1}}));
    std::vector<SLine> beta, gamma;
    build_lines(g, 12, beta, gamma);
    auto tm = build_triangle(g, gamma);
    auto grid = grid_for({}, 2.375 / 256);
    auto V = construct_V(g, forward_union(g, tm.H0, grid), grid, 12);
    // the first turn's orbit leaves every finite union of tower images
    CHECK_FALSE(V.ok);
    CHECK(V.p == -1);
}
