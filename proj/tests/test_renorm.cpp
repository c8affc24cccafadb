#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "lozilab/renorm.hpp"

using namespace lozi;

namespace {
PiecewiseMap bcnf_g(double a = 1.9, double d = 0.1) {
    return normalized(family_by_name("bcnf_sym").instantiate({{"a", a}, {"delta", d}}));
}

// rank of -(eps/lambda)^(n-1), n = 2..n_max, computed directly
std::vector<int> ranks(double lambda, int eps, int n_max) {
    std::vector<std::pair<double, int>> v;
    for (int n = 2; n <= n_max; ++n) v.push_back({-std::pow(eps / lambda, n - 1), n});
    std::sort(v.begin(), v.end());
    std::vector<int> r(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) r[static_cast<std::size_t>(v[k].second - 2)] = static_cast<int>(k);
    return r;
}
}  // namespace

TEST_CASE("pulled s-lines map onto the original line") {
    auto g = bcnf_g();
    SLine l{0.3, -0.2};
    for (Side s : {Side::MINUS, Side::PLUS}) {
        SLine p = pull(g, s, l);
        for (double y : {-0.5, 0.0, 0.7}) {
            Vec2 z{p.x_at(y), y};
            Vec2 w = g.branch(s).forward(z);
            CHECK(std::abs(l.side(w)) < 1e-12);
        }
    }
    SLine t = sline_through({1, 2}, {0.1, 1});
    CHECK(t.x_at(2) == doctest::Approx(1.0));
    CHECK(t.q == doctest::Approx(0.1));
    Vec2 m = meet_face(SLine{0.5, 0.0}, 0.1, 0.0);
    CHECK(m.x == doctest::Approx(0.5));
    CHECK(m.y == doctest::Approx(0.1));
}

TEST_CASE("R-conditions hold for the symmetric normal form and Lozi") {
    for (auto m0 : {family_by_name("bcnf_sym").instantiate({{"a", 1.9}, {"delta", 0.1}}), make_lozi(1.9, 0.1)}) {
        auto ac = synthesize_affine_cones(m0);
        REQUIRE(ac);
        auto g = normalized(m0);
        auto rr = find_rectangle(g, ac->c_min);
        REQUIRE(rr);
        auto R = check_R_conditions(g, *rr);
        CHECK(R.R1);
        CHECK(R.R1_margin > 0);
        CHECK(R.R3);
        CHECK(R.R4);
        CHECK(R.pass);
        // f(R) inside R on the boundary samples
        for (auto p : rr->loop) CHECK(point_in_loop(rr->loop, g(p), 1e-12));
    }
}

TEST_CASE("return certificates and ordering on the orientation preserving instance") {
    auto m0 = family_by_name("bcnf_sym").instantiate({{"a", 1.9}, {"delta", 0.1}});
    auto ac = synthesize_affine_cones(m0);
    auto g = normalized(m0);
    CHECK(g.epsilon == 1);
    auto rr = find_rectangle(g, ac->c_min);
    REQUIRE(rr);
    auto part = build_partition(g, *rr, 10);
    auto rd = first_return(g, part, 5, 300, 2);
    REQUIRE(rd.strips.size() == 4);
    for (const auto& s : rd.strips) {
        CHECK(s.certificate);
        CHECK(s.return_ok == s.samples);
    }
    auto o = verify_ordering(rd, ac->lambda, 1, 5);
    CHECK(o.expected_rank == ranks(ac->lambda, 1, 5));
    CHECK(o.order_pass);
    CHECK(o.flip_corrected_pass);
}

TEST_CASE("reversing orientation alternates the ordering") {
    auto m = make_lozi(1.9, 0.1);
    auto ac = synthesize_affine_cones(m);
    auto g = normalized(m);
    CHECK(g.epsilon == -1);
    auto r = ranks(ac->lambda, -1, 6);
    // -(-1/lambda)^(n-1): odd n negative side, even n positive side
    CHECK(r[0] > r[1]);
    CHECK(r[1] < r[2]);
    auto rr = find_rectangle(g, ac->c_min);
    REQUIRE(rr);
    auto part = build_partition(g, *rr, 10);
    auto rd = first_return(g, part, 6, 300, 2);
    auto o = verify_ordering(rd, ac->lambda, -1, 6);
    CHECK(o.expected_rank == r);
    CHECK(o.order_pass);
}

TEST_CASE("theta table obeys the sign and contraction recursions") {
    auto m0 = family_by_name("bcnf_sym").instantiate({{"a", 1.9}, {"delta", 0.1}});
    auto ac = synthesize_affine_cones(m0);
    auto g = normalized(m0);
    auto rr = find_rectangle(g, ac->c_min);
    REQUIRE(rr);
    auto part = build_partition(g, *rr, 12);
    auto th = verify_theta(g, part, 4, 8, ac->lambda);
    CHECK(th.sign_failures == 0);
    CHECK(th.contraction_failures == 0);
    CHECK(th.worst_ratio <= 1.0 + 1e-6);
    CHECK(th.pass);
}

TEST_CASE("first turn lies on the divider image") {
    auto g = bcnf_g();
    Vec2 A = first_turn(g);
    CHECK(std::abs(height_over_image(g, A)) < 1e-12);
}

TEST_CASE("tangency roots are sign changes of the offset") {
    auto fam = family_by_name("bcnf_sym");
    auto roots = tangency_curve(fam, {{"a", 1.9}, {"delta", 0.1}}, "a", 1.55, 1.75, 3, 20, 1e-13);
    REQUIRE_FALSE(roots.empty());
    const auto& r = roots.front();
    CHECK(std::abs(r.offset) < 1e-9);
    auto off = [&](double a) { return gamma_offset(normalized(fam.instantiate({{"a", a}, {"delta", 0.1}})), 3); };
    CHECK(off(r.mu - 1e-6) * off(r.mu + 1e-6) < 0);
}

TEST_CASE("tower height shrinks with the determinant") {
    double prev = INFINITY;
    for (double d : {0.1, 0.05, 0.01}) {
        auto g = bcnf_g(1.75, d);
        std::vector<SLine> beta, gamma;
        build_lines(g, 12, beta, gamma);
        auto tm = build_triangle(g, gamma);
        CHECK(tm.tower_height < prev);
        prev = tm.tower_height;
    }
    auto lg = normalized(make_lozi(1.9, 0.1));
    std::vector<SLine> beta, gamma;
    build_lines(lg, 12, beta, gamma);
    CHECK_THROWS(build_triangle(lg, gamma));
}
