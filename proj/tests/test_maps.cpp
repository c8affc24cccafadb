#include <cmath>
#include <random>

#include "doctest.h"
#include "lozilab/maps.hpp"

using namespace lozi;

namespace {
// standard Lozi formula, written out independently of the branch machinery
Vec2 lozi_ref(double a, double b, Vec2 z) { return {1 + z.y - a * std::abs(z.x), b * z.x}; }
}  // namespace

TEST_CASE("Lozi evaluation against the formula") {
    auto m = make_lozi(1.9, 0.1);
    CHECK(eval(m, {0, 0}) == Vec2{1, 0});
    Vec2 w = eval(m, {1, 0});
    CHECK(w.x == doctest::Approx(-0.9));
    CHECK(w.y == doctest::Approx(0.1));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-2, 2);
    for (int i = 0; i < 1000; ++i) {
        Vec2 z{U(rng), U(rng)};
        Vec2 a = eval(m, z), b = lozi_ref(1.9, 0.1, z);
        CHECK(a.x == doctest::Approx(b.x).epsilon(1e-14));
        CHECK(a.y == doctest::Approx(b.y).epsilon(1e-14));
    }
}

TEST_CASE("inverse branches") {
    auto m = make_lozi(1.9, 0.1);
    auto z = inverse_branch(m, Side::PLUS, {1, 0});
    REQUIRE(z);
    CHECK(std::abs(z->x) < 1e-15);
    CHECK(std::abs(z->y) < 1e-15);
    // image of a left point: its PLUS preimage would have x < 0
    Vec2 w = eval(m, {-0.5, 0.2});
    CHECK_FALSE(inverse_branch(m, Side::PLUS, w));
    auto back = inverse_branch(m, Side::MINUS, w);
    REQUIRE(back);
    CHECK(back->x == doctest::Approx(-0.5));
}

TEST_CASE("round trip and gluing continuity") {
    for (const auto& m : {make_lozi(1.9, 0.1), make_bcnf(1.7, 0.2, -1.5, 0.3), make_smooth_lozi(1.9, 0.1, 0.05)}) {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> U(-1.5, 1.5);
        double worst = 0;
        for (int i = 0; i < 10000; ++i) {
            Vec2 z{U(rng), U(rng)};
            Side s = m.side_of(z);
            auto back = inverse_branch(m, s, m.branch(s).forward(z));
            REQUIRE(back);
            worst = std::max(worst, norm(*back - z));
        }
        CHECK(worst < 1e-9);
        double glue = 0;
        for (int i = 0; i <= 1000; ++i) {
            double y = -3 + 6.0 * i / 1000;
            Vec2 z{m.divider.phi(y), y};
            glue = std::max(glue, norm(m.minus.forward(z) - m.plus.forward(z)));
        }
        CHECK(glue < 1e-10);
    }
}

TEST_CASE("analytic jacobian matches central differences") {
    auto m = make_smooth_lozi(1.9, 0.1, 0.05);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(-1.5, 1.5);
    for (int i = 0; i < 1000; ++i) {
        Vec2 z{U(rng), U(rng)};
        if (std::abs(m.divider.side(z)) < 1e-3) continue;
        const Branch& br = m.branch(m.side_of(z));
        Mat2 J = br.jacobian(z);
        double h = 1e-6;
        Vec2 dx = (br.forward(z + Vec2{h, 0}) - br.forward(z - Vec2{h, 0})) / (2 * h);
        Vec2 dy = (br.forward(z + Vec2{0, h}) - br.forward(z - Vec2{0, h})) / (2 * h);
        double scale = std::max({std::abs(J.a), std::abs(J.b), std::abs(J.c), std::abs(J.d), 1.0});
        CHECK(std::abs(J.a - dx.x) < 1e-6 * scale);
        CHECK(std::abs(J.c - dx.y) < 1e-6 * scale);
        CHECK(std::abs(J.b - dy.x) < 1e-6 * scale);
        CHECK(std::abs(J.d - dy.y) < 1e-6 * scale);
    }
}

TEST_CASE("fixed points of Lozi from the branch-wise linear equations") {
    double a = 1.9, b = 0.1;
    auto fp = fixed_points(make_lozi(a, b));
    CHECK(fp.X.z.x == doctest::Approx(1 / (1 + a - b)).epsilon(1e-12));
    CHECK(fp.X.z.y == doctest::Approx(b / (1 + a - b)).epsilon(1e-12));
    CHECK(fp.Y.z.x == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(fp.Y.z.y == doctest::Approx(-0.1).epsilon(1e-12));
    // multipliers at X: mu^2 + a mu - b = 0
    double disc = std::sqrt(a * a + 4 * b);
    CHECK(fp.X.mu_u == doctest::Approx((-a - disc) / 2).epsilon(1e-12));
    CHECK(fp.X.mu_s == doctest::Approx((-a + disc) / 2).epsilon(1e-12));
    CHECK(fp.X.mu_u < 0);
    CHECK(fp.X.hyperbolic);
}

TEST_CASE("affine branch with eigenvalues -2 and 0.05 reverses W^u orientation") {
    // companion matrix of (mu + 2)(mu - 0.05)
    Mat2 A{-1.95, 1, 0.1, 0};
    auto m = make_affine({1.95, 1, 0.1, 0}, {1, 0}, A, {1, 0}, 0, 0);
    auto fp = fixed_points(m);
    CHECK(fp.X.mu_u == doctest::Approx(-2.0));
    CHECK(fp.X.mu_s == doctest::Approx(0.05));
}

TEST_CASE("orientation sign from the determinant") {
    CHECK(orientation_sign(make_lozi(1.9, 0.1)) == -1);
    CHECK(orientation_sign(make_lozi(1.9, -0.1)) == 1);
    CHECK(orientation_sign(make_bcnf(1.9, 0.1, -1.9, 0.1)) == 1);
    auto mixed = make_bcnf(1.9, 0.1, -1.9, -0.1);
    CHECK_FALSE(orientation_report(mixed).consistent);
}

TEST_CASE("divider image is a single u-curve") {
    auto m = make_lozi(1.9, 0.1);
    Polyline d = divider_polyline(m, -2, 2);
    auto img = image_polyline(m, d);
    REQUIRE(img.size() == 1);
    for (auto p : img[0]) CHECK(std::abs(p.y) < 1e-15);
    auto c = make_curve(Orientation::U, divider_polyline(m, -2, 2), 1.0);
    auto rep = curve_image(m, c, Cone{{1, 0}, 0.9});
    CHECK(rep.valid);
    CHECK(rep.pieces.size() == 1);
}

TEST_CASE("a crossing segment splits into two pieces sharing one endpoint") {
    auto m = make_lozi(1.9, 0.1);
    auto parts = split_at_divider(m, {{-0.5, 0.1}, {0.5, 0.1}});
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].back() == parts[1].front());
    CHECK(std::abs(parts[0].back().x) < 1e-12);
    CHECK(split_at_divider(m, {{0.1, 0}, {0.5, 0.3}}).size() == 1);
}

TEST_CASE("normalization puts f(R_-) below the divider image") {
    auto g = normalized(make_bcnf(1.9, 0.1, -1.9, 0.1));
    CHECK(lower_convention(g));
    CHECK(height_over_image(g, g({-0.5, 0.0})) < 0);
}

TEST_CASE("family registry and parameter text") {
    auto p = parse_params("a=1.9,b=0.1");
    CHECK(p.at("a") == 1.9);
    CHECK(parse_params(params_string(p)) == p);
    CHECK_THROWS_AS(family_by_name("nope"), std::invalid_argument);
    CHECK_THROWS(parse_params("a=1.9,b"));
    auto fam = family_by_name("lozi");
    CHECK(fam.in_M0({{"a", 1.9}, {"b", 0.0}}));
    CHECK_FALSE(fam.in_M0({{"a", 1.9}, {"b", 0.1}}));
    // continuity in mu, spot test
    auto m1 = fam.instantiate({{"a", 1.9}, {"b", 0.1}}), m2 = fam.instantiate({{"a", 1.9 + 1e-7}, {"b", 0.1}});
    double d = 0;
    for (int i = 0; i <= 20; ++i)
        for (int j = 0; j <= 20; ++j) {
            Vec2 z{-1 + 0.1 * i, -1 + 0.1 * j};
            d = std::max(d, norm(m1(z) - m2(z)));
        }
    CHECK(d < 1e-6);
}
