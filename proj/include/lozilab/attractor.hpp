#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lozilab/cones.hpp"
#include "lozilab/geometry.hpp"
#include "lozilab/manifolds.hpp"
#include "lozilab/maps.hpp"

namespace lozi {

enum class Verdict { PASS, FAIL, INDETERMINATE };
std::string to_string(Verdict v);

struct RegionPolygon {
    Loop boundary;  // counter-clockwise
    std::vector<Loop> holes;
};

RegionPolygon region_from_loop(Loop l);
double area(const RegionPolygon& r);
bool region_contains(const RegionPolygon& r, Vec2 p, double tol = 0.0);

struct TrappingReport {
    Verdict verdict = Verdict::FAIL;
    double margin = 0;  // min distance of the image boundary to the region boundary, negative if it leaves
    std::size_t image_vertices = 0;
    std::string detail;
    bool pass() const { return verdict == Verdict::PASS; }
};

// f(cl U) inside U, tested on the exact image of the boundary
TrappingReport verify_trapping(const PiecewiseMap& m, const RegionPolygon& U, double touch_tol = 1e-10);
// union of regions: every image boundary must stay in the union
TrappingReport verify_trapping(const PiecewiseMap& m, const std::vector<RegionPolygon>& U, double touch_tol = 1e-10);

// first turn of W^u(X): the unstable eigenline meets the image of the divider
std::optional<Vec2> unstable_turn(const PiecewiseMap& m);
// hull of flattened ellipses around the first `turns` points of the turn orbit
std::optional<RegionPolygon> turn_region(const PiecewiseMap& m, double r = 1e-3, int turns = 3, double stretch = 2.5);

// cover of the images of every box, exact for affine branches
BoxSet image_cover(const PiecewiseMap& m, const BoxGrid& g, const BoxSet& s);

struct ClosureResult {
    BoxSet boxes;
    std::vector<std::size_t> sizes;  // per step
    int steps = 0;
    bool closed = false;
    std::string detail;
};
// V_0 = seed, V_n = N_r(cover(f(V_{n-1}))) until the union absorbs the next step
ClosureResult trapping_closure(const PiecewiseMap& m, const BoxGrid& g, const BoxSet& seed, int max_steps = 200,
                               std::size_t box_cap = 2000000, int dilation = 1);

std::vector<RegionPolygon> outline_regions(const BoxGrid& g, const BoxSet& s);

struct GResult {
    std::vector<RegionPolygon> regions;  // a single disc when built from turns
    std::string method;                  // "turns" or "closure"
    TrappingReport trapping;
    double h = 0;
};
// turn hull first, box closure around an orbit cover as fallback
GResult make_G(const PiecewiseMap& m, double h);

struct AttractorApprox {
    BoxGrid grid;
    std::vector<Vec2> points;
    BoxSet boxes;
    int generation = 0;
    std::vector<std::size_t> cover_sizes;  // index n
    std::vector<bool> nested;              // cover_n inside N_1(cover_{n-1})
    bool boundary_capped = false;
    int boundary_generations = 0;
    std::vector<Polyline> boundary;  // last uncapped boundary image
};

// iterated grid samples of spacing h/2 plus the iterated boundary while under the vertex cap
AttractorApprox iterate_region(const PiecewiseMap& m, const RegionPolygon& F, int n, const BoxGrid& grid,
                               std::size_t vertex_cap = 50000);
AttractorApprox attractor_from_orbit(const PiecewiseMap& m, Vec2 z0, std::size_t n_points, const BoxGrid& grid,
                                     std::size_t burn_in = 1000);
// points map within one box diagonal of the cover
bool forward_invariant(const PiecewiseMap& m, const AttractorApprox& att);

struct HausdorffReport {
    double distance = 0;
    double cover_to_wu = 0, wu_to_cover = 0;
    Vec2 worst_cover, worst_wu;
};
// box centres against W^u sampled at spacing h/4
HausdorffReport hausdorff_attractor_vs_unstable(const AttractorApprox& att, const ManifoldApprox& wu);

enum class MixingVerdict { MIXING_CONSISTENT, TRANSITIVE_CONSISTENT, NOT_TRANSITIVE, INDETERMINATE };
std::string to_string(MixingVerdict v);

struct MixingReport {
    MixingVerdict verdict = MixingVerdict::INDETERMINATE;
    std::size_t nodes = 0, edges = 0, leaked = 0;
    bool strongly_connected = false;
    int positive_power = -1;  // least k <= steps with M^k > 0
    std::size_t empty_rows = 0;
};
MixingReport mixing_matrix(const PiecewiseMap& m, const AttractorApprox& att, int steps = 64, int samples_per_side = 4);

struct BasinEstimate {
    RegionPolygon sample_box;
    std::size_t n_samples = 0;
    int horizon = 0, tail = 0;
    double fraction_converging = 0;
    double std_error = 0;
    double h = 0;
    std::uint64_t seed = 0;
};
BasinEstimate basin_fraction(const PiecewiseMap& m, const AttractorApprox& att, const RegionPolygon& sample_box,
                             std::size_t n_samples, int horizon, std::uint64_t seed = 1, int threads = 0);

struct VResult {
    int p = -1;               // least p with f^{p+1}(H) inside int H
    std::vector<double> eps;  // neighbourhood radius per V_n
    std::vector<RegionPolygon> regions;
    BoxSet boxes;  // cover of V
    TrappingReport trapping;
    bool inside_H_exact = false;
    double H_margin = 0;
    bool inside_H = false;  // cover(V) inside cover(H)
    int steps = 0;
    bool ok = false;
    std::string detail;
};
// H_0, f(H_0), ... until the next image adds no box
std::vector<Loop> forward_union(const PiecewiseMap& m, const Loop& H0, const BoxGrid& g, int cap = 40);
// V = union of V_0..V_p built on exact polygon images with round offsets
VResult construct_V(const PiecewiseMap& m, const std::vector<Loop>& H, const BoxGrid& g, int p_cap = 40);

struct LReport {
    Verdict L1 = Verdict::INDETERMINATE, L2 = Verdict::INDETERMINATE, L3 = Verdict::INDETERMINATE,
            L4 = Verdict::INDETERMINATE;
    double det_max = 0, lambda = 0, trapping_margin = 0;
    int L4_components = 0;
    std::string detail;
};
LReport check_L_conditions(const PiecewiseMap& m, const std::optional<AffineCones>& cones, const GResult& G);

BoxGrid grid_for(const BBox& window, double h);

}  // namespace lozi
