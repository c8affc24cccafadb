#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lozilab/cones.hpp"
#include "lozilab/geometry.hpp"
#include "lozilab/maps.hpp"

namespace lozi {

// s-line x = p + q*y; pull-backs of lines by affine branches stay lines
struct SLine {
    double p = 0, q = 0;
    double x_at(double y) const { return p + q * y; }
    double side(Vec2 z) const { return z.x - x_at(z.y); }
};

SLine sline_through(Vec2 pt, Vec2 dir);
SLine pull(const PiecewiseMap& m, Side s, const SLine& l);

// horizontal faces y = y0 + k*min(x, 0)
struct FaceParams {
    double y0_lower = -0.1, k_lower = 0.0;
    double y0_upper = 0.1, k_upper = 0.0;
};

Vec2 meet_face(const SLine& l, double y0, double k);

struct RenormRect {
    Rectangle R;
    FaceParams faces;
    SLine left, right;  // W^s(Y) line and its PLUS pull-back
    Loop loop;
};

RenormRect make_renorm_rect(const PiecewiseMap& m, const FaceParams& fp);
// grid search over face parameters maximizing the margin of f(R) inside R
std::optional<RenormRect> find_rectangle(const PiecewiseMap& m, double c_min);

struct RConditionReport {
    bool R1 = false;
    double R1_margin = 0;  // min distance of image vertices inside R (negative when outside)
    bool R2_left = false, R2_right = false, R2_lower = false;
    bool R2_upper_literal = false;  // upper face below the divider image, as written
    bool R2_upper_alt = false;      // upper face above the divider image
    bool R2_left_invariant = false;
    bool R3 = false;
    bool R4 = false;
    int R4_intervals = 0;
    bool pass = false;  // R1, R2 with the alternative upper-face reading, R3, R4
    std::string detail;
};
RConditionReport check_R_conditions(const PiecewiseMap& m, const RenormRect& rr);

struct RenormPartition {
    RenormRect rect;
    std::vector<SLine> beta_lines, gamma_lines;  // index 0 is beta_1 / gamma_1
    std::vector<MonotoneCurve> beta, gamma;      // clipped to R, with beta_inf = R_l and gamma_inf = R_r appended
    Strip B, C, D;
    std::vector<Strip> C_parts;  // C_2, C_3, ...
    int depth = 0;
    int epsilon = 1;

    const Strip& C_n(int n) const { return C_parts.at(static_cast<std::size_t>(n - 2)); }
};

// pull-back lines only, no rectangle needed
void build_lines(const PiecewiseMap& m, int m_max, std::vector<SLine>& beta, std::vector<SLine>& gamma);
RenormPartition build_partition(const PiecewiseMap& m, const RenormRect& rr, int m_max = 12);

struct ReturnStrip {
    int n = 0;
    Loop C, U;
    Loop C_left, C_right, U_left, U_right;  // split by S_n
    MonotoneCurve S;
    Polyline T;                     // f^n(S_n)
    Polyline bnd_l, bnd_r;          // images of the lower / upper faces of C_n
    double T_height = 0;            // max distance of T_n from the divider image
    bool halves_split = false;      // one half above the divider image, the other below
    std::size_t samples = 0, return_ok = 0, escaped = 0;
    bool certificate = false;
};

struct ReturnMapData {
    std::vector<ReturnStrip> strips;  // n = 2 .. n_max
    bool pass = false;
};

ReturnMapData first_return(const PiecewiseMap& m, const RenormPartition& part, int n_max,
                           std::size_t samples_per_strip = 1000, std::uint64_t seed = 1);

struct OrderingReport {
    int n_max = 0;
    int pairs = 0;
    std::vector<std::string> mismatches;
    std::vector<int> expected_rank;  // rank of -(eps/lambda)^(n-1) among n = 2..n_max
    std::vector<std::string> flip_observed;
    bool order_pass = false;
    bool flip_stated_pass = false;     // -eps^(n-1) dU^r <| dU^l
    bool flip_corrected_pass = false;  // eps^n dU^l <| dU^r
};

OrderingReport verify_ordering(const ReturnMapData& rd, double lambda, int epsilon, int n_max);

struct ThetaTable {
    int i_max = 0, m_max = 0;
    std::vector<std::vector<double>> theta;  // theta[i-1][m-2]
    int sign_checks = 0, sign_failures = 0;
    int first_row_checks = 0, first_row_failures = 0;
    int contraction_checks = 0, contraction_failures = 0;
    double worst_ratio = 0;  // max |theta_{i,m}| / (lambda^-1 |theta_{i+1,m-1}|)
    int closer_checks = 0, closer_failures = 0;
    bool pass = false;
};

ThetaTable verify_theta(const PiecewiseMap& m, const RenormPartition& part, int i_max, int m_max, double lambda);

struct TriangleModel {
    Vec2 D, E, A;
    Loop H0;
    std::vector<PolySet> C_hat, U_hat;  // index i-2
    std::vector<Loop> towers;
    int p = 0, q = 0;
    int p_least_U = 0;  // least i with U_hat nonempty
    double tower_height = 0;
    bool towers_closed = false;
};

// first turn of W^u_loc(Y): image of its divider crossing
Vec2 first_turn(const PiecewiseMap& m);
// U_hat holds the return images f^i(C_hat_i) clipped to H0
TriangleModel build_triangle(const PiecewiseMap& m, const std::vector<SLine>& gamma, int tower_cap = 64);
void compute_pq(TriangleModel& tm, const std::vector<Vec2>& attractor_points);

enum class Tangency { T1, T2, NEITHER };
std::string to_string(Tangency t);

struct TangencyReport {
    Tangency verdict = Tangency::NEITHER;
    bool return_of_divider_in_C2 = false;
    int index = 0;
    std::string detail;
};
TangencyReport classify_tangency(const PiecewiseMap& m, const TriangleModel& tm, const std::vector<SLine>& gamma);

struct PReport {
    bool P1 = false, P2 = false, P3 = false, P4 = false, orientation = false;
    std::vector<std::string> witnesses;
};
PReport verify_P(const PiecewiseMap& m, const TriangleModel& tm, const std::vector<SLine>& gamma);

// signed horizontal offset of the first turn from gamma_i
double gamma_offset(const PiecewiseMap& m, int i);

struct TangencyRoot {
    double mu = 0;
    double offset = 0;
};
// roots in the named parameter over [lo, hi] with the other parameters fixed
std::vector<TangencyRoot> tangency_curve(const ParamFamily& fam, const Params& base, const std::string& param,
                                         double lo, double hi, int i, int grid = 40, double tol = 1e-10);

}  // namespace lozi
