#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "lozilab/geometry.hpp"
#include "lozilab/maps.hpp"

namespace lozi {

enum class FieldKind { UNSTABLE, STABLE };

struct ConeField {
    std::function<Cone(Vec2)> assignment;
    UniversalConePair universal;
    FieldKind kind = FieldKind::UNSTABLE;
    bool constant = true;

    Cone at(Vec2 z) const { return assignment(z); }
};

// slope-c cone about an axis; c <= 0 gives the degenerate axis-line cone
Cone slope_cone(Vec2 axis, double c);
ConeField constant_field(const Cone& c, FieldKind kind, const UniversalConePair& u);

struct SampleRegion {
    Vec2 lo{-1.5, -0.5};
    Vec2 hi{1.5, 0.5};
};

struct HyperbolicityReport {
    double lambda_estimate = INFINITY;
    double lambda_target = 0.0;
    double det_max = 0.0;
    std::vector<Vec2> invariance_failures;
    std::size_t samples = 0;
    std::size_t skipped = 0;
    bool degenerate = false;
    bool pass = false;
};

HyperbolicityReport verify_invariance(const PiecewiseMap& m, const ConeField& cf_u, const ConeField& cf_s,
                                      std::size_t n_samples, const SampleRegion& region, std::uint64_t seed = 1);
HyperbolicityReport verify_expansion(const PiecewiseMap& m, const ConeField& cf_u, const ConeField& cf_s,
                                     double lambda_target, std::size_t n_samples, const SampleRegion& region,
                                     std::uint64_t seed = 1);

struct AffineCones {
    ConeField u, s;
    double c_min = 0, c_max = 0;  // unstable slope interval
    double d_min = 0, d_max = 0;  // stable inverse-slope interval
    double c = 0, d = 0;          // chosen
    double lambda_u = 0, lambda_s = 0, lambda = 0;
    bool m0_like = false;
    bool disjoint = false;
};

std::optional<AffineCones> synthesize_affine_cones(const PiecewiseMap& m);

// exact min of |A w| / |w| over the cone
double min_expansion(const Mat2& A, const Cone& c);
// exact test that the linear map sends cone src into cone dst
bool maps_cone_into(const Mat2& A, const Cone& src, const Cone& dst, double tol = 1e-12);

struct VolumeReport {
    double det_max = 0.0;
    bool pass = false;
    std::size_t samples = 0;
};
VolumeReport check_volume_contraction(const PiecewiseMap& m, std::size_t n_samples, const SampleRegion& region,
                                      std::uint64_t seed = 1);

}  // namespace lozi
