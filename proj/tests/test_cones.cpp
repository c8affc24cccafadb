#include <cmath>

#include "doctest.h"
#include "lozilab/cones.hpp"

using namespace lozi;

namespace {
// exact minimum of |A(1,s)| / |(1,s)| over |s| <= c by dense scan, Lozi branch matrices
double scan_min_expansion(double a, double b, double c) {
    double best = INFINITY;
    for (double sign : {-1.0, 1.0})
        for (int i = 0; i <= 20000; ++i) {
            double s = -c + 2 * c * i / 20000;
            Vec2 w{sign * a + s, b};
            best = std::min(best, norm(w) / std::sqrt(1 + s * s));
        }
    return best;
}
}  // namespace

TEST_CASE("Lozi slope interval from the roots of c^2 - a c + b") {
    double a = 1.9, b = 0.1;
    auto ac = synthesize_affine_cones(make_lozi(a, b));
    REQUIRE(ac);
    double disc = std::sqrt(a * a - 4 * b);
    CHECK(ac->c_min == doctest::Approx((a - disc) / 2).epsilon(1e-9));
    CHECK(ac->c_max == doctest::Approx((a + disc) / 2).epsilon(1e-9));
    CHECK(ac->c_min == doctest::Approx(0.0542).epsilon(1e-3));
    CHECK_FALSE(ac->m0_like);
    CHECK(ac->disjoint);
}

TEST_CASE("certified expansion against a dense scan and the lower bound") {
    double a = 1.9, b = 0.1;
    auto ac = synthesize_affine_cones(make_lozi(a, b));
    REQUIRE(ac);
    double c = ac->c;
    CHECK(ac->lambda_u == doctest::Approx(scan_min_expansion(a, b, c)).epsilon(1e-8));
    // (a - c)/sqrt(1 + c^2) drops the b^2 term, so it bounds from below
    double lower = (a - ac->c_min) / std::sqrt(1 + ac->c_min * ac->c_min);
    CHECK(lower == doctest::Approx(1.843).epsilon(1e-3));
    CHECK(ac->lambda >= lower);
    CHECK(ac->lambda > std::sqrt(2.0));
}

TEST_CASE("no slope interval when a^2 - 4b < 0") {
    CHECK_FALSE(synthesize_affine_cones(make_lozi(1.0, 0.3)));
}

TEST_CASE("b = 0 is degenerate") {
    auto ac = synthesize_affine_cones(make_lozi(1.9, 0.0));
    REQUIRE(ac);
    CHECK(ac->c_min == 0.0);
    CHECK(ac->m0_like);
}

TEST_CASE("invariance of slope-c cones follows the sign of c^2 - a c + b") {
    auto m = make_lozi(1.9, 0.1);
    UniversalConePair k = make_universal(0.01, 0.01);
    ConeField s = constant_field(slope_cone({0, 1}, 0.6), FieldKind::STABLE, k);
    for (double c : {0.01, 0.05, 0.06, 0.25, 1.0, 1.84, 1.85}) {
        bool predicted = c * c - 1.9 * c + 0.1 <= 0;
        ConeField u = constant_field(slope_cone({1, 0}, c), FieldKind::UNSTABLE, k);
        auto rep = verify_invariance(m, u, s, 2000, {}, 3);
        bool unstable_ok = true;
        for (auto z : rep.invariance_failures) {
            Mat2 J = m.jacobian(z);
            unstable_ok = unstable_ok && maps_cone_into(J, u.at(z), u.at(m(z)));
        }
        CHECK(unstable_ok == predicted);
    }
}

TEST_CASE("sampled expansion never undercuts the certified value") {
    auto m = make_lozi(1.9, 0.1);
    auto ac = synthesize_affine_cones(m);
    REQUIRE(ac);
    auto rep = verify_expansion(m, ac->u, ac->s, std::sqrt(2.0), 20000, {}, 7);
    CHECK(rep.pass);
    CHECK(rep.lambda_estimate >= ac->lambda - 1e-9);
    auto inv = verify_invariance(m, ac->u, ac->s, 20000, {}, 7);
    CHECK(inv.pass);
    CHECK(inv.invariance_failures.empty());
}

TEST_CASE("narrower cones do not decrease the expansion") {
    double a = 1.9, b = 0.1;
    Mat2 A{-a, 1, b, 0};
    double prev = 0;
    for (int i = 0; i <= 20; ++i) {
        double c = 1.8 - i * (1.8 - 0.06) / 20;  // decreasing slope = narrowing cone
        double l = min_expansion(A, slope_cone({1, 0}, c));
        CHECK(l >= prev - 1e-12);
        prev = l;
    }
}

TEST_CASE("isometry expands nothing") {
    auto m = make_rotation(0.7);
    UniversalConePair k;
    ConeField u = constant_field(slope_cone({1, 0}, 0.5), FieldKind::UNSTABLE, k);
    ConeField s = constant_field(slope_cone({0, 1}, 0.5), FieldKind::STABLE, k);
    auto rep = verify_expansion(m, u, s, std::sqrt(2.0), 500, {}, 1);
    CHECK(rep.lambda_estimate == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(rep.pass);
}

TEST_CASE("volume contraction is |det| = b") {
    auto r = check_volume_contraction(make_lozi(1.9, 0.1), 10000, {}, 1);
    CHECK(r.det_max == doctest::Approx(0.1));
    CHECK(r.pass);
    CHECK_FALSE(check_volume_contraction(make_lozi(1.9, 1.0), 1000, {}, 1).pass);
    CHECK_FALSE(check_volume_contraction(make_rotation(0.3), 1000, {}, 1).pass);
}

TEST_CASE("degenerate axis field on M0 checks the axis line") {
    auto m = make_lozi(1.9, 0.0);
    UniversalConePair k;
    ConeField u = constant_field(slope_cone({1, 0}, 0.0), FieldKind::UNSTABLE, k);
    ConeField s = constant_field(slope_cone({0, 1}, 0.0), FieldKind::STABLE, k);
    auto rep = verify_invariance(m, u, s, 1000, {}, 1);
    CHECK(rep.degenerate);
}
