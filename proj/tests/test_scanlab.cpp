#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "lozilab/emit.hpp"
#include "lozilab/renorm.hpp"
#include "lozilab/scanlab.hpp"

using namespace lozi;

namespace {
Budgets quick() {
    Budgets b;
    b.cone_samples = 2000;
    b.resolution = 128;
    b.n_max = 4;
    b.strip_samples = 50;
    return b;
}

Verdict v(const ClassificationRecord& r, const std::string& id) { return r.verdicts.at(id).verdict; }

// closed-form L1 and L3 for Lozi: |det| = b < 1 and exact expansion at c_min
bool l1_l3_closed_form(double a, double b) {
    if (a * a - 4 * b < 0) return false;
    double c = (a - std::sqrt(a * a - 4 * b)) / 2;
    double lam = std::sqrt((a - c) * (a - c) + b * b) / std::sqrt(1 + c * c);
    return b < 1 && lam > std::sqrt(2.0);
}
}  // namespace

TEST_CASE("classification of the reference Lozi parameter") {
    auto r = classify_parameter(family_by_name("lozi"), {{"a", 1.9}, {"b", 0.1}}, quick());
    CHECK(r.epsilon == -1);
    CHECK_FALSE(r.m0);
    CHECK(v(r, "L1") == Verdict::PASS);
    CHECK(v(r, "L3") == Verdict::PASS);
    CHECK(r.lambda_est > std::sqrt(2.0));
    CHECK(r.lambda_est == doctest::Approx(1.843).epsilon(3e-3));
    for (const auto& id : condition_ids()) {
        REQUIRE(r.verdicts.count(id));
        CHECK_FALSE(r.verdicts.at(id).stamp.empty());
    }
}

TEST_CASE("no cones means the C checks fail") {
    auto r = classify_parameter(family_by_name("lozi"), {{"a", 1.0}, {"b", 0.3}}, quick());
    CHECK(v(r, "C1") == Verdict::FAIL);
    CHECK(v(r, "C2") == Verdict::FAIL);
    CHECK(v(r, "C3") == Verdict::FAIL);
    CHECK(v(r, "L3") == Verdict::FAIL);
}

TEST_CASE("M0 parameters leave the Lozi-like checks undecided") {
    auto r = classify_parameter(family_by_name("bcnf_sym"), {{"a", 1.9}, {"delta", 0.0}}, quick());
    CHECK(r.m0);
    for (const char* id : {"L1", "L2", "L3", "L4"}) CHECK(v(r, id) == Verdict::INDETERMINATE);
}

TEST_CASE("L3 verdict agrees with lambda against sqrt 2") {
    for (double a : {1.5, 1.6, 1.7, 1.9})
        for (double b : {0.05, 0.3}) {
            auto r = classify_parameter(family_by_name("lozi"), {{"a", a}, {"b", b}}, quick());
            if (v(r, "L3") == Verdict::INDETERMINATE) continue;
            CHECK((v(r, "L3") == Verdict::PASS) == (r.lambda_est > std::sqrt(2.0)));
        }
}

TEST_CASE("scan grid ordering, size and closed-form agreement") {
    ScanConfig c;
    c.family = "lozi";
    c.axes = {{"a", 1.5, 2.0, 3}, {"b", 0.05, 0.3, 3}};
    c.budgets = quick();
    c.budgets.attractor_checks = false;
    c.threads = 3;
    auto recs = scan_grid(c);
    REQUIRE(recs.size() == 9);
    CHECK(recs[0].mu.at("a") == 1.5);
    CHECK(recs[0].mu.at("b") == 0.05);
    CHECK(recs[1].mu.at("b") == doctest::Approx(0.175));
    CHECK(recs[3].mu.at("a") == doctest::Approx(1.75));
    for (const auto& r : recs) {
        bool pass = v(r, "L1") == Verdict::PASS && v(r, "L3") == Verdict::PASS;
        CHECK(pass == l1_l3_closed_form(r.mu.at("a"), r.mu.at("b")));
    }
    c.axes = {{"a", 1.8, 1.9, 2}, {"b", 0.1, 0.2, 2}};
    CHECK(scan_grid(c).size() == 4);
    c.axes.clear();
    CHECK_THROWS_AS(scan_grid(c), usage_error);
}

TEST_CASE("scan output is identical across runs and thread counts") {
    ScanConfig c;
    c.family = "lozi";
    c.axes = {{"a", 1.7, 1.9, 2}, {"b", 0.1, 0.2, 2}};
    c.budgets = quick();
    c.threads = 1;
    auto a = records_csv(scan_grid(c));
    c.threads = 4;
    auto b = records_csv(scan_grid(c));
    CHECK(a == b);
    CHECK(records_json(scan_grid(c)).dump() == records_json(scan_grid(c)).dump());
}

TEST_CASE("tangency locus re-verifies and shrinks the towers toward M0") {
    auto fam = family_by_name("bcnf_sym");
    auto L = trace_tangency(fam, 3, {{{"a", 1.9}, {"delta", 0.2}}, "a", 1.4, 1.7}, "delta", 40, 0.01);
    REQUIRE(L.vertices.size() >= 21);
    CHECK_FALSE(L.truncated);
    CHECK(L.reached_M0);
    for (std::size_t k = 0; k < L.vertices.size(); ++k) {
        const auto& vx = L.vertices[k];
        double off = gamma_offset(normalized(fam.instantiate(vx.mu)), 3);
        CHECK(std::abs(off) < 1e-9);
        if (k) {
            const auto& p = L.vertices[k - 1];
            double d = std::hypot(vx.mu.at("a") - p.mu.at("a"), vx.mu.at("delta") - p.mu.at("delta"));
            CHECK(d <= L.step * (1 + 1e-9));
        }
    }
    std::size_t n = L.vertices.size();
    for (std::size_t k = n - 4; k < n; ++k) CHECK(L.vertices[k].tower_height < L.vertices[k - 1].tower_height);
}

TEST_CASE("config sections and axes") {
    auto c = parse_config("# comment\nfamily = lozi\n[scan]\naxes = a=1.5:2.0:6;b=0.05:0.3:6\nsamples = 500\n");
    CHECK(c.get("global", "family") == "lozi");
    CHECK(c.get("scan", "samples") == "500");
    auto s = scan_config_from(c);
    REQUIRE(s.axes.size() == 2);
    CHECK(s.axes[1].name == "b");
    CHECK(s.axes[1].count == 6);
    CHECK(s.budgets.cone_samples == 500);
    CHECK(grid_nodes(s).size() == 36);
    CHECK_THROWS_AS(parse_config("[scan\n"), usage_error);
    CHECK_THROWS_AS(parse_config("novalue\n"), usage_error);
    CHECK_THROWS_AS(parse_axes("a=1:2"), usage_error);
    CHECK_THROWS_AS(scan_config_from(parse_config("[scan]\nsamples = many\n")), usage_error);
}

TEST_CASE("csv header for an empty table") {
    std::string csv = records_csv({});
    CHECK(csv.find('\n') == csv.size() - 1);
    CHECK(csv.rfind("family,mu,epsilon,lambda_est,m0,S1,", 0) == 0);
}

TEST_CASE("record json round trip") {
    auto r = classify_parameter(family_by_name("lozi"), {{"a", 1.9}, {"b", 0.1}}, quick());
    auto j = records_json({r});
    CHECK(j.at("schema_version") == kSchemaVersion);
    auto back = records_from_json(nlohmann::json::parse(j.dump()));
    REQUIRE(back.size() == 1);
    CHECK(records_json(back).dump() == j.dump());
    CHECK(back[0].lambda_est == r.lambda_est);
    auto bad = j;
    bad["schema_version"] = kSchemaVersion + 1;
    CHECK_THROWS(records_from_json(bad));
}

TEST_CASE("svg stride downsampling to the cap with a note") {
    std::vector<Vec2> pts;
    for (int i = 0; i < 1000000; ++i) pts.push_back({std::cos(i * 0.001), std::sin(i * 0.0013)});
    std::size_t stride = 0;
    auto kept = stride_downsample(pts, 5000, &stride);
    CHECK(stride == 200);
    CHECK(kept.size() == 5000);
    CHECK(kept[1] == pts[200]);
    SvgPlot plot;
    plot.point_cap = 5000;
    SvgLayer l;
    l.points = pts;
    plot.layers = {l};
    std::string svg = render_svg(plot);
    std::size_t circles = 0;
    for (std::size_t p = svg.find("<circle"); p != std::string::npos; p = svg.find("<circle", p + 1)) ++circles;
    CHECK(circles == 5000);
    CHECK(svg.find("downsampled 1000000 -&gt; 5000") != std::string::npos);
    CHECK(render_svg(plot) == svg);
}

TEST_CASE("io errors carry the system message") {
    auto dir = std::filesystem::temp_directory_path() / "lozilab_test_io";
    std::filesystem::create_directories(dir);
    auto file = (dir / "x.txt").string();
    write_text(file, "abc");
    CHECK(read_text(file) == "abc");
    CHECK_THROWS_AS(read_text((dir / "missing.txt").string()), io_error);
    try {
        read_text((dir / "missing.txt").string());
    } catch (const io_error& e) {
        CHECK(std::string(e.what()).find("No such file") != std::string::npos);
    }
    // a regular file in place of a directory
    CHECK_THROWS_AS(write_text(file + "/y.txt", "z"), io_error);
    std::filesystem::remove_all(dir);
}
