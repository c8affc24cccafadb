#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace lozi {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    bool operator==(const Vec2&) const = default;
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 lerp(Vec2 a, Vec2 b, double t) { return a + (b - a) * t; }

struct Mat2 {
    double a = 1, b = 0, c = 0, d = 1;  // [[a b] [c d]]

    Vec2 operator*(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
    Mat2 operator*(const Mat2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }
    double det() const { return a * d - b * c; }
    double trace() const { return a + d; }
    Mat2 inverse() const;
};

// real eigen pair, |mu_small| <= |mu_large|
struct Eigen2 {
    bool real = false;
    double mu_small = 0, mu_large = 0;
    Vec2 v_small, v_large;
};
Eigen2 eigen(const Mat2& m);

class geometry_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Cones: {u : |<u, axis>| >= coeff |u|}; coeff 0 is the degenerate axis-line cone
struct Cone {
    Vec2 axis{1, 0};
    double coeff = 0.5;
};

bool cone_contains(const Cone& c, Vec2 u, double tol = 0.0);
double slope_bound_for(double coeff);
double coeff_for_slope(double slope);

struct UniversalConePair {
    Cone unstable{{1, 0}, 0.5};
    Cone stable{{0, 1}, 0.5};
    bool disjoint() const;
};
UniversalConePair make_universal(double alpha_u, double alpha_s);

enum class Orientation { U, S };

struct MonotoneCurve {
    Orientation orientation = Orientation::U;
    std::vector<Vec2> samples;
    double slope_bound = 0.0;
    bool truncated = false;

    double coord(Vec2 p) const { return orientation == Orientation::U ? p.x : p.y; }
    double other(Vec2 p) const { return orientation == Orientation::U ? p.y : p.x; }
    double lo() const { return coord(samples.front()); }
    double hi() const { return coord(samples.back()); }
    // graph value over the parameter axis, none outside the extent
    std::optional<double> value_at(double t) const;
    double length() const;
};

// orders samples by the parameter coordinate (reverses if needed)
MonotoneCurve make_curve(Orientation o, std::vector<Vec2> pts, double slope_bound, bool truncated = false);

struct CurveReport {
    bool valid = true;
    bool monotone = true;
    double max_slope = 0.0;
    double bound = 0.0;
    std::size_t worst_index = 0;
};
CurveReport validate_curve(const MonotoneCurve& c, const Cone& governing, double tol = 1e-12);

std::optional<Vec2> intersect_us(const MonotoneCurve& gu, const MonotoneCurve& gs);

enum class Order { LEFT, RIGHT, INCOMPARABLE };
std::string to_string(Order o);

using Loop = std::vector<Vec2>;
using Polyline = std::vector<Vec2>;

Order order_u(Vec2 a, Vec2 b, const UniversalConePair& k);
Order order_s(Vec2 a, Vec2 b, const UniversalConePair& k);
// curves or regions: compared on horizontal (u) or vertical (s) test lines
Order order_u(const Polyline& a, const Polyline& b, bool closed_a, bool closed_b, int n_lines = 64);
Order order_s(const Polyline& a, const Polyline& b, bool closed_a, bool closed_b, int n_lines = 64);

struct BBox {
    Vec2 lo{INFINITY, INFINITY};
    Vec2 hi{-INFINITY, -INFINITY};
    void add(Vec2 p);
    bool empty() const { return lo.x > hi.x; }
    bool contains(Vec2 p, double tol = 0) const;
    double diam() const { return norm(hi - lo); }
};
BBox bbox_of(const std::vector<Vec2>& pts);

double signed_area(const Loop& l);
double polyline_length(const Polyline& p);
double dist_point_segment(Vec2 p, Vec2 a, Vec2 b);
double dist_to_polyline(Vec2 p, const Polyline& l, bool closed);
int winding_number(const Loop& l, Vec2 p);
// inside or within tol of the boundary
bool point_in_loop(const Loop& l, Vec2 p, double tol = 1e-12);
std::optional<Vec2> segment_intersection(Vec2 a, Vec2 b, Vec2 c, Vec2 d);
bool loop_is_simple(const Loop& l);
// parts of a polyline inside the closed region bounded by a simple loop
std::vector<Polyline> clip_polyline(const Polyline& p, const Loop& region);
// x-coordinates where an open or closed polyline crosses y = c
std::vector<double> crossings_h(const Polyline& p, double c, bool closed);
std::vector<double> crossings_v(const Polyline& p, double c, bool closed);

struct Rectangle {
    MonotoneCurve left, right, lower, upper;
    Loop loop() const;
    double diam() const;
};

enum class StripKind { S_STRIP, U_STRIP };

struct Strip {
    StripKind kind = StripKind::S_STRIP;
    MonotoneCurve a, b;
    Loop loop;
    bool proper = true;
};

// s-strip between s-curves a (left) and b (right), closed by the host's horizontal faces
Strip make_s_strip(const Rectangle& host, const MonotoneCurve& a, const MonotoneCurve& b);

// planar regions with holes, booleans through Boost.Geometry
struct Poly {
    Loop outer;
    std::vector<Loop> holes;
};
using PolySet = std::vector<Poly>;

PolySet polyset(const Loop& l);
PolySet poly_intersection(const PolySet& a, const PolySet& b);
PolySet poly_union(const PolySet& a, const PolySet& b);
PolySet poly_union_all(const std::vector<PolySet>& parts);
PolySet poly_difference(const PolySet& a, const PolySet& b);
double area(const PolySet& s);
bool contains(const PolySet& s, Vec2 p, double tol = 1e-12);
double boundary_distance(const PolySet& s, Vec2 p);
// outward offset by eps with round joins (inscribed arcs, so within eps)
PolySet poly_buffer(const PolySet& s, double eps, int points_per_circle = 16);
// counter-clockwise hull, no repeated closing vertex
Loop convex_hull(const std::vector<Vec2>& pts);

// uniform box grid with packed integer keys
struct BoxGrid {
    Vec2 origin;
    double h = 1.0;

    std::int64_t key(int i, int j) const {
        return (static_cast<std::int64_t>(i) << 32) ^ static_cast<std::uint32_t>(j);
    }
    std::int64_t key_of(Vec2 p) const;
    std::pair<int, int> index(std::int64_t k) const {
        return {static_cast<int>(k >> 32), static_cast<int>(static_cast<std::int32_t>(k & 0xffffffff))};
    }
    Vec2 center(std::int64_t k) const;
    Loop box_loop(std::int64_t k) const;
};

using BoxSet = std::vector<std::int64_t>;  // sorted, unique

void normalize(BoxSet& s);
BoxSet dilate(const BoxGrid& g, const BoxSet& s, int r);
bool is_subset(const BoxSet& a, const BoxSet& b);
BoxSet set_union(const BoxSet& a, const BoxSet& b);
bool has_box(const BoxSet& s, std::int64_t k);
// boxes meeting the closed region bounded by loop
BoxSet rasterize_loop(const BoxGrid& g, const Loop& l);
// boxes meeting a polyline
BoxSet rasterize_polyline(const BoxGrid& g, const Polyline& p, bool closed);
// outer boundary loops of a box union (holes filled)
std::vector<Loop> box_union_outlines(const BoxGrid& g, const BoxSet& s);

// bucketed nearest-segment queries
class SegmentIndex {
public:
    SegmentIndex(std::vector<std::pair<Vec2, Vec2>> segs, double cell);
    // distance to nearest segment; searches rings up to max_r, returns max_r if none closer
    double nearest(Vec2 p, double max_r) const;
    std::size_t size() const { return segs_.size(); }

private:
    std::vector<std::pair<Vec2, Vec2>> segs_;
    double cell_;
    std::vector<std::pair<std::int64_t, std::uint32_t>> buckets_;  // sorted (cell key, seg)
    std::int64_t cell_key(int i, int j) const {
        return (static_cast<std::int64_t>(i) << 32) ^ static_cast<std::uint32_t>(j);
    }
};

std::vector<std::pair<Vec2, Vec2>> segments_of(const Polyline& p, bool closed);

nlohmann::json to_json(const MonotoneCurve& c);
MonotoneCurve curve_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Rectangle& r);
Rectangle rectangle_from_json(const nlohmann::json& j);

}  // namespace lozi
