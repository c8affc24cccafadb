#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lozilab/cones.hpp"
#include "lozilab/geometry.hpp"
#include "lozilab/maps.hpp"

namespace lozi {

enum class ManSide { STABLE, UNSTABLE };

struct ManifoldApprox {
    FixedPoint base;
    ManSide side = ManSide::UNSTABLE;
    std::vector<MonotoneCurve> pieces;
    double length_budget = INFINITY;
    int generation = 0;
    Cone governing;  // cone the pieces were validated against
    bool valid = true;
    std::vector<std::size_t> failing_pieces;
    bool truncated = false;

    double total_length() const;
    std::vector<Polyline> polylines() const;
};

struct LocalManifolds {
    ManifoldApprox stable, unstable;
};

// eigen-direction segments through a saddle, cut at the divider; cones give the validation bounds
LocalManifolds local_manifolds(const PiecewiseMap& m, const FixedPoint& p, const UniversalConePair& k);
LocalManifolds local_manifolds(const PiecewiseMap& m, const FixedPointData& fp, const UniversalConePair& k);

// keeps the latest generation (it contains every earlier one)
ManifoldApprox grow_unstable(const PiecewiseMap& m, const ManifoldApprox& seed, int generations,
                             double budget = INFINITY, double chord_tol = 1e-6);

// one pull-back step of an s-curve under one inverse branch
std::vector<MonotoneCurve> pull_back(const PiecewiseMap& m, Side s, const MonotoneCurve& c, double slope_bound,
                                     double chord_tol = 1e-6);

// union over generations of pull-backs, clipped to the region
ManifoldApprox grow_stable(const PiecewiseMap& m, const ManifoldApprox& seed, const Loop& region, int generations,
                           double budget = INFINITY, double chord_tol = 1e-6);

struct ArcBoundReport {
    double length = 0, bound = 0;
    bool pass = false;
};
ArcBoundReport arc_bound_check(const MonotoneCurve& c, double alpha_u, double diam_R, double tol = 1e-12);

struct DensityReport {
    double max_gap = 0;
    double cell_diag = 0;
    std::size_t cells = 0;
    Vec2 worst;
};
// grid over the window; only cells containing a point of `occupied` count (all cells if empty)
DensityReport density_report(const ManifoldApprox& stable, const BBox& window, int grid_n,
                             const std::vector<Vec2>& occupied = {});

struct WitnessReport {
    std::optional<Vec2> point;
    int generations = 0;
    bool crossed_divider = false;
    bool crossed_divider_image = false;
    std::string diagnostic;
};
WitnessReport crossing_witness(const PiecewiseMap& m, const ManifoldApprox& stable, const MonotoneCurve& arc,
                               int max_generations = 200, double length_cap = 1e4);

}  // namespace lozi
