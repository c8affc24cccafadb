#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lozilab/geometry.hpp"

namespace lozi {

enum class Side { MINUS, PLUS };

class condition_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Branch {
    std::function<Vec2(Vec2)> forward;
    std::function<Mat2(Vec2)> jacobian;
    std::function<Vec2(Vec2)> inverse;
    Side tag = Side::MINUS;
    bool affine = false;
    Mat2 A;  // valid when affine
    Vec2 t;
};

Branch affine_branch(const Mat2& A, Vec2 t, Side tag);

// divider x = phi(y); affine dividers are lines x = x0 + k*y
struct Divider {
    std::function<double(double)> phi;
    bool linear = true;
    double x0 = 0.0, k = 0.0;

    double side(Vec2 z) const { return z.x - phi(z.y); }
};

Divider line_divider(double x0, double k);

using Params = std::map<std::string, double>;

struct Window {
    Vec2 lo{-4, -4};
    Vec2 hi{4, 4};
};

struct PiecewiseMap {
    std::string family;
    Params params;
    Branch minus, plus;
    Divider divider;
    int epsilon = 1;
    double lambda_claimed = 0.0;
    Window window;
    bool reflected = false;  // conjugated by (x,y) -> (x,-y)

    bool affine() const { return minus.affine && plus.affine; }
    Side side_of(Vec2 z) const { return divider.side(z) < 0 ? Side::MINUS : Side::PLUS; }
    const Branch& branch(Side s) const { return s == Side::MINUS ? minus : plus; }
    Vec2 operator()(Vec2 z) const { return branch(side_of(z)).forward(z); }
    Mat2 jacobian(Vec2 z) const { return branch(side_of(z)).jacobian(z); }
};

struct ParamFamily {
    std::string name;
    std::vector<std::string> param_names;
    std::function<PiecewiseMap(const Params&)> instantiate;
    // degenerate cone set: determinant zero on some branch
    std::function<bool(const Params&)> in_M0;
};

PiecewiseMap make_lozi(double a, double b);
// (x,y) -> (tau_i x + y + 1, -delta_i x), i by sign of x
PiecewiseMap make_bcnf(double tau_l, double delta_l, double tau_r, double delta_r);
PiecewiseMap make_affine(const Mat2& A_minus, Vec2 t_minus, const Mat2& A_plus, Vec2 t_plus, double x0, double k,
                         const std::string& family = "affine");
// rotation about the origin on both sides (isometry / non-mixing control)
PiecewiseMap make_rotation(double angle);
// Henon-like smooth branches glued on x = 0, used to exercise non-affine paths
PiecewiseMap make_smooth_lozi(double a, double b, double s);

ParamFamily family_by_name(const std::string& name);
Params parse_params(const std::string& text);
std::string params_string(const Params& p);

Vec2 eval(const PiecewiseMap& m, Vec2 z);
std::optional<Vec2> inverse_branch(const PiecewiseMap& m, Side s, Vec2 w);
// preimage under f (the unique branch whose half-plane contains the result)
std::optional<Vec2> inverse(const PiecewiseMap& m, Vec2 w);

struct ImageReport {
    std::vector<MonotoneCurve> pieces;
    bool valid = true;
    std::vector<std::size_t> failing_pieces;
};

// split a polyline at divider crossings (crossing points shared by both pieces)
std::vector<Polyline> split_at_divider(const PiecewiseMap& m, const Polyline& p);
// image of an open polyline, split at divider crossings; refined to chord tolerance for non-affine maps
std::vector<Polyline> image_polyline(const PiecewiseMap& m, const Polyline& p, double chord_tol = 1e-6);
// image of a closed loop (exact for affine maps)
Loop image_loop(const PiecewiseMap& m, const Loop& l, double chord_tol = 1e-6);
ImageReport curve_image(const PiecewiseMap& m, const MonotoneCurve& c, const Cone& image_cone,
                        double chord_tol = 1e-6);
// preimage polyline under one branch, restricted to that branch's closed half-plane
std::vector<Polyline> pullback_polyline(const PiecewiseMap& m, Side s, const Polyline& p, double chord_tol = 1e-6);

struct FixedPoint {
    Vec2 z;
    Side side = Side::PLUS;
    bool hyperbolic = false;
    double mu_s = 0, mu_u = 0;
    Vec2 v_s, v_u;
};

struct FixedPointData {
    FixedPoint X;  // right half-plane
    FixedPoint Y;  // left half-plane
};

FixedPointData fixed_points(const PiecewiseMap& m);

struct OrientationReport {
    int sign = 0;
    bool consistent = true;
    std::size_t samples = 0;
};
OrientationReport orientation_report(const PiecewiseMap& m, int grid = 40);
int orientation_sign(const PiecewiseMap& m);

// (x,y) -> (x,-y) conjugate
PiecewiseMap reflect_y(const PiecewiseMap& m);
// true when f(R_-) lies below the image of the divider
bool lower_convention(const PiecewiseMap& m);
// conjugates by the reflection when needed so that f(R_-) is the lower half-plane
PiecewiseMap normalized(const PiecewiseMap& m);

// image of the divider truncated to the window
Polyline divider_polyline(const PiecewiseMap& m, double ylo, double yhi, int n = 2);
Polyline divider_image(const PiecewiseMap& m, double ylo, double yhi);
// signed height of z over the image of the divider (positive above)
double height_over_image(const PiecewiseMap& m, Vec2 z);

}  // namespace lozi
