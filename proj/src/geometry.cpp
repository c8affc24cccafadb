#include "lozilab/geometry.hpp"

#include <algorithm>
#include <cassert>
#include <map>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>
#include <boost/geometry/geometries/multi_point.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>

namespace bg = boost::geometry;

namespace lozi {

Mat2 Mat2::inverse() const {
    double dt = det();
    if (dt == 0.0) throw geometry_error("singular matrix");
    return {d / dt, -b / dt, -c / dt, a / dt};
}

static Vec2 eigvec(const Mat2& m, double mu) {
    Vec2 v1{m.b, mu - m.a};
    Vec2 v2{mu - m.d, m.c};
    Vec2 v = norm(v1) >= norm(v2) ? v1 : v2;
    double n = norm(v);
    if (n == 0.0) return {1, 0};  // scalar matrix
    v = v / n;
    if (v.x < 0 || (v.x == 0 && v.y < 0)) v = -v;
    return v;
}

Eigen2 eigen(const Mat2& m) {
    Eigen2 e;
    double h = m.trace() / 2;
    double disc = h * h - m.det();
    if (disc < 0) return e;
    e.real = true;
    double s = std::sqrt(disc);
    double m1 = h + s, m2 = h - s;
    if (std::abs(m1) < std::abs(m2)) std::swap(m1, m2);
    e.mu_large = m1;
    e.mu_small = m2;
    e.v_large = eigvec(m, m1);
    e.v_small = eigvec(m, m2);
    return e;
}

bool cone_contains(const Cone& c, Vec2 u, double tol) {
    double n = norm(u);
    if (n == 0.0) throw std::invalid_argument("cone_contains: zero vector");
    if (c.coeff <= 0.0) return std::abs(cross(u, c.axis)) <= std::max(tol, 1e-12) * n;
    return std::abs(dot(u, c.axis)) >= (c.coeff - tol) * n;
}

double slope_bound_for(double coeff) {
    if (coeff <= 0.0) return 0.0;
    return std::sqrt(1.0 - coeff * coeff) / coeff;
}

double coeff_for_slope(double slope) { return 1.0 / std::sqrt(1.0 + slope * slope); }

bool UniversalConePair::disjoint() const {
    return unstable.coeff * unstable.coeff + stable.coeff * stable.coeff > 1.0;
}

UniversalConePair make_universal(double alpha_u, double alpha_s) {
    return {{{1, 0}, alpha_u}, {{0, 1}, alpha_s}};
}

std::optional<double> MonotoneCurve::value_at(double t) const {
    if (samples.empty() || t < lo() || t > hi()) return std::nullopt;
    auto it = std::lower_bound(samples.begin(), samples.end(), t,
                               [&](const Vec2& p, double v) { return coord(p) < v; });
    if (it == samples.begin()) return other(*it);
    auto prev = it - 1;
    double t0 = coord(*prev), t1 = coord(*it);
    if (t1 == t0) return other(*it);
    double s = (t - t0) / (t1 - t0);
    return other(*prev) + s * (other(*it) - other(*prev));
}

double MonotoneCurve::length() const { return polyline_length(samples); }

MonotoneCurve make_curve(Orientation o, std::vector<Vec2> pts, double slope_bound, bool truncated) {
    MonotoneCurve c{o, std::move(pts), slope_bound, truncated};
    if (c.samples.size() >= 2 && c.coord(c.samples.front()) > c.coord(c.samples.back()))
        std::reverse(c.samples.begin(), c.samples.end());
    return c;
}

CurveReport validate_curve(const MonotoneCurve& c, const Cone& governing, double tol) {
    if (c.samples.size() < 2) throw std::invalid_argument("validate_curve: fewer than 2 samples");
    CurveReport r;
    r.bound = slope_bound_for(governing.coeff);
    for (std::size_t i = 0; i + 1 < c.samples.size(); ++i) {
        double dt = c.coord(c.samples[i + 1]) - c.coord(c.samples[i]);
        double dv = std::abs(c.other(c.samples[i + 1]) - c.other(c.samples[i]));
        if (dt <= 0.0) {
            r.monotone = false;
            r.valid = false;
            r.worst_index = i;
            continue;
        }
        double s = dv / dt;
        if (s > r.max_slope) {
            r.max_slope = s;
            if (r.monotone) r.worst_index = i;
        }
    }
    if (r.max_slope > r.bound * (1.0 + tol) + tol) r.valid = false;
    return r;
}

std::optional<Vec2> intersect_us(const MonotoneCurve& gu, const MonotoneCurve& gs) {
    if (gu.samples.size() < 2 || gs.samples.size() < 2) return std::nullopt;
    const auto& S = gs.samples;
    std::vector<Vec2> hits;
    for (std::size_t i = 0; i + 1 < gu.samples.size(); ++i) {
        Vec2 a = gu.samples[i], b = gu.samples[i + 1];
        double ylo = std::min(a.y, b.y), yhi = std::max(a.y, b.y);
        if (yhi < S.front().y || ylo > S.back().y) continue;
        auto first = std::lower_bound(S.begin(), S.end(), ylo,
                                      [](const Vec2& p, double v) { return p.y < v; });
        std::size_t j0 = first == S.begin() ? 0 : static_cast<std::size_t>(first - S.begin()) - 1;
        for (std::size_t j = j0; j + 1 < S.size() && S[j].y <= yhi; ++j) {
            auto p = segment_intersection(a, b, S[j], S[j + 1]);
            if (!p) continue;
            bool dup = false;
            for (const auto& q : hits)
                if (norm(q - *p) < 1e-9) dup = true;
            if (!dup) hits.push_back(*p);
        }
    }
    if (hits.empty()) return std::nullopt;
    if (hits.size() > 1) throw geometry_error("intersect_us: multiple crossings, cones not disjoint");
    return hits.front();
}

std::string to_string(Order o) {
    switch (o) {
        case Order::LEFT: return "LEFT";
        case Order::RIGHT: return "RIGHT";
        default: return "INCOMPARABLE";
    }
}

Order order_u(Vec2 a, Vec2 b, const UniversalConePair& k) {
    Vec2 d = b - a;
    if (norm(d) == 0.0 || !cone_contains(k.unstable, d)) return Order::INCOMPARABLE;
    return d.x > 0 ? Order::LEFT : Order::RIGHT;
}

Order order_s(Vec2 a, Vec2 b, const UniversalConePair& k) {
    Vec2 d = b - a;
    if (norm(d) == 0.0 || !cone_contains(k.stable, d)) return Order::INCOMPARABLE;
    return d.y > 0 ? Order::LEFT : Order::RIGHT;
}

static std::pair<double, double> y_extent(const Polyline& p) {
    double lo = INFINITY, hi = -INFINITY;
    for (auto v : p) {
        lo = std::min(lo, v.y);
        hi = std::max(hi, v.y);
    }
    return {lo, hi};
}

static Order order_on_lines(const Polyline& a, const Polyline& b, bool ca, bool cb, int n) {
    auto [alo, ahi] = y_extent(a);
    auto [blo, bhi] = y_extent(b);
    double lo = std::max(alo, blo), hi = std::min(ahi, bhi);
    if (!(hi > lo)) return Order::INCOMPARABLE;
    int left = 0, right = 0, used = 0;
    for (int k = 0; k < n; ++k) {
        double y = lo + (k + 0.5) / n * (hi - lo);
        auto xa = crossings_h(a, y, ca);
        auto xb = crossings_h(b, y, cb);
        if (xa.empty() || xb.empty()) continue;
        ++used;
        auto [amin, amax] = std::minmax_element(xa.begin(), xa.end());
        auto [bmin, bmax] = std::minmax_element(xb.begin(), xb.end());
        if (*amax <= *bmin + 1e-12)
            ++left;
        else if (*bmax <= *amin + 1e-12)
            ++right;
        else
            return Order::INCOMPARABLE;
    }
    if (used == 0) return Order::INCOMPARABLE;
    if (left == used) return Order::LEFT;
    if (right == used) return Order::RIGHT;
    return Order::INCOMPARABLE;
}

Order order_u(const Polyline& a, const Polyline& b, bool closed_a, bool closed_b, int n_lines) {
    return order_on_lines(a, b, closed_a, closed_b, n_lines);
}

Order order_s(const Polyline& a, const Polyline& b, bool closed_a, bool closed_b, int n_lines) {
    auto swap_xy = [](const Polyline& p) {
        Polyline q(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) q[i] = {p[i].y, p[i].x};
        return q;
    };
    return order_on_lines(swap_xy(a), swap_xy(b), closed_a, closed_b, n_lines);
}

void BBox::add(Vec2 p) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
}

bool BBox::contains(Vec2 p, double tol) const {
    return p.x >= lo.x - tol && p.x <= hi.x + tol && p.y >= lo.y - tol && p.y <= hi.y + tol;
}

BBox bbox_of(const std::vector<Vec2>& pts) {
    BBox b;
    for (auto p : pts) b.add(p);
    return b;
}

double signed_area(const Loop& l) {
    double s = 0;
    for (std::size_t i = 0; i < l.size(); ++i) s += cross(l[i], l[(i + 1) % l.size()]);
    return s / 2;
}

double polyline_length(const Polyline& p) {
    double s = 0;
    for (std::size_t i = 0; i + 1 < p.size(); ++i) s += norm(p[i + 1] - p[i]);
    return s;
}

double dist_point_segment(Vec2 p, Vec2 a, Vec2 b) {
    Vec2 d = b - a;
    double L = dot(d, d);
    double t = L > 0 ? std::clamp(dot(p - a, d) / L, 0.0, 1.0) : 0.0;
    return norm(p - (a + d * t));
}

double dist_to_polyline(Vec2 p, const Polyline& l, bool closed) {
    double best = INFINITY;
    std::size_t n = l.size();
    if (n == 1) return norm(p - l[0]);
    std::size_t m = closed ? n : n - 1;
    for (std::size_t i = 0; i < m; ++i) best = std::min(best, dist_point_segment(p, l[i], l[(i + 1) % n]));
    return best;
}

int winding_number(const Loop& l, Vec2 p) {
    int w = 0;
    std::size_t n = l.size();
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 a = l[i], b = l[(i + 1) % n];
        if (a.y <= p.y) {
            if (b.y > p.y && cross(b - a, p - a) > 0) ++w;
        } else if (b.y <= p.y && cross(b - a, p - a) < 0) {
            --w;
        }
    }
    return w;
}

bool point_in_loop(const Loop& l, Vec2 p, double tol) {
    if (winding_number(l, p) != 0) return true;
    return dist_to_polyline(p, l, true) <= tol;
}

std::optional<Vec2> segment_intersection(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    Vec2 r = b - a, s = d - c;
    double den = cross(r, s);
    if (den == 0.0) return std::nullopt;
    double t = cross(c - a, s) / den;
    double u = cross(c - a, r) / den;
    const double e = 1e-14;
    if (t < -e || t > 1 + e || u < -e || u > 1 + e) return std::nullopt;
    return a + r * std::clamp(t, 0.0, 1.0);
}

bool loop_is_simple(const Loop& l) {
    std::size_t n = l.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 a = l[i], b = l[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            Vec2 c = l[j], d = l[(j + 1) % n];
            if (segment_intersection(a, b, c, d)) return false;
        }
    }
    return true;
}

std::vector<Polyline> clip_polyline(const Polyline& p, const Loop& region) {
    std::vector<Polyline> out;
    Polyline cur;
    auto flush = [&] {
        if (cur.size() >= 2) out.push_back(cur);
        cur.clear();
    };
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        Vec2 a = p[i], b = p[i + 1];
        std::vector<double> ts{0.0, 1.0};
        for (std::size_t j = 0; j < region.size(); ++j) {
            Vec2 c = region[j], d = region[(j + 1) % region.size()];
            Vec2 r = b - a, s = d - c;
            double den = cross(r, s);
            if (den == 0.0) continue;
            double t = cross(c - a, s) / den, u = cross(c - a, r) / den;
            if (t > 0.0 && t < 1.0 && u >= 0.0 && u <= 1.0) ts.push_back(t);
        }
        std::sort(ts.begin(), ts.end());
        for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
            if (ts[k + 1] - ts[k] <= 0.0) continue;
            Vec2 u = lerp(a, b, ts[k]), v = lerp(a, b, ts[k + 1]);
            if (point_in_loop(region, lerp(a, b, 0.5 * (ts[k] + ts[k + 1])))) {
                if (cur.empty()) cur.push_back(u);
                else if (norm(cur.back() - u) > 1e-12) {
                    flush();
                    cur.push_back(u);
                }
                cur.push_back(v);
            } else {
                flush();
            }
        }
    }
    flush();
    return out;
}

std::vector<double> crossings_h(const Polyline& p, double c, bool closed) {
    std::vector<double> xs;
    std::size_t n = p.size();
    if (n < 2) return xs;
    std::size_t m = closed ? n : n - 1;
    for (std::size_t i = 0; i < m; ++i) {
        Vec2 a = p[i], b = p[(i + 1) % n];
        if ((a.y <= c && c < b.y) || (b.y <= c && c < a.y)) {
            double t = (c - a.y) / (b.y - a.y);
            xs.push_back(a.x + t * (b.x - a.x));
        }
    }
    if (!closed && p.back().y == c) xs.push_back(p.back().x);
    std::sort(xs.begin(), xs.end());
    return xs;
}

std::vector<double> crossings_v(const Polyline& p, double c, bool closed) {
    Polyline q(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) q[i] = {p[i].y, p[i].x};
    return crossings_h(q, c, closed);
}

Loop Rectangle::loop() const {
    Loop l;
    for (auto p : lower.samples) l.push_back(p);
    for (std::size_t i = 1; i < right.samples.size(); ++i) l.push_back(right.samples[i]);
    for (std::size_t i = upper.samples.size(); i-- > 0;)
        if (i + 1 < upper.samples.size()) l.push_back(upper.samples[i]);
    for (std::size_t i = left.samples.size(); i-- > 1;)
        if (i + 1 < left.samples.size()) l.push_back(left.samples[i]);
    return l;
}

double Rectangle::diam() const {
    Loop l = loop();
    double d = 0;
    for (std::size_t i = 0; i < l.size(); ++i)
        for (std::size_t j = i + 1; j < l.size(); ++j) d = std::max(d, norm(l[i] - l[j]));
    return d;
}

static std::vector<Vec2> face_between(const MonotoneCurve& face, double x0, double x1) {
    std::vector<Vec2> out;
    for (auto p : face.samples)
        if (p.x > x0 && p.x < x1) out.push_back(p);
    return out;
}

Strip make_s_strip(const Rectangle& host, const MonotoneCurve& a, const MonotoneCurve& b) {
    Strip s;
    s.kind = StripKind::S_STRIP;
    s.a = a;
    s.b = b;
    Loop& l = s.loop;
    for (auto p : a.samples) l.push_back(p);
    for (auto p : face_between(host.upper, a.samples.back().x, b.samples.back().x)) l.push_back(p);
    for (std::size_t i = b.samples.size(); i-- > 0;) l.push_back(b.samples[i]);
    auto low = face_between(host.lower, a.samples.front().x, b.samples.front().x);
    for (std::size_t i = low.size(); i-- > 0;) l.push_back(low[i]);
    double dl = INFINITY;
    for (auto p : a.samples) dl = std::min(dl, dist_to_polyline(p, host.left.samples, false));
    for (auto p : b.samples) dl = std::min(dl, dist_to_polyline(p, host.right.samples, false));
    s.proper = dl > 1e-12;
    return s;
}

// Boost.Geometry plumbing
using BPoint = bg::model::d2::point_xy<double>;
using BPoly = bg::model::polygon<BPoint, false, true>;
using BMulti = bg::model::multi_polygon<BPoly>;

static void fill_ring(bg::model::ring<BPoint, false, true>& r, const Loop& l) {
    for (auto p : l) r.push_back(BPoint(p.x, p.y));
    if (!l.empty()) r.push_back(BPoint(l.front().x, l.front().y));
}

static BMulti to_bg(const PolySet& s) {
    BMulti m;
    for (const auto& p : s) {
        BPoly bp;
        fill_ring(bp.outer(), p.outer);
        for (const auto& h : p.holes) {
            bp.inners().emplace_back();
            fill_ring(bp.inners().back(), h);
        }
        bg::correct(bp);
        m.push_back(bp);
    }
    return m;
}

static Loop ring_to_loop(const bg::model::ring<BPoint, false, true>& r) {
    Loop l;
    for (std::size_t i = 0; i + 1 < r.size(); ++i) l.push_back({r[i].x(), r[i].y()});
    return l;
}

static PolySet from_bg(const BMulti& m) {
    PolySet s;
    for (const auto& bp : m) {
        Poly p;
        p.outer = ring_to_loop(bp.outer());
        for (const auto& h : bp.inners()) p.holes.push_back(ring_to_loop(h));
        if (p.outer.size() >= 3) s.push_back(std::move(p));
    }
    return s;
}

PolySet polyset(const Loop& l) {
    Loop o = l;
    if (signed_area(o) < 0) std::reverse(o.begin(), o.end());
    return {Poly{o, {}}};
}

PolySet poly_intersection(const PolySet& a, const PolySet& b) {
    BMulti out;
    bg::intersection(to_bg(a), to_bg(b), out);
    return from_bg(out);
}

PolySet poly_union(const PolySet& a, const PolySet& b) {
    BMulti out;
    bg::union_(to_bg(a), to_bg(b), out);
    return from_bg(out);
}

PolySet poly_union_all(const std::vector<PolySet>& parts) {
    PolySet acc;
    for (const auto& p : parts) acc = acc.empty() ? from_bg(to_bg(p)) : poly_union(acc, p);
    return acc;
}

PolySet poly_difference(const PolySet& a, const PolySet& b) {
    BMulti out;
    bg::difference(to_bg(a), to_bg(b), out);
    return from_bg(out);
}

double area(const PolySet& s) {
    double t = 0;
    for (const auto& p : s) {
        t += std::abs(signed_area(p.outer));
        for (const auto& h : p.holes) t -= std::abs(signed_area(h));
    }
    return t;
}

bool contains(const PolySet& s, Vec2 p, double tol) {
    for (const auto& q : s) {
        if (!point_in_loop(q.outer, p, tol)) continue;
        bool in_hole = false;
        for (const auto& h : q.holes)
            if (winding_number(h, p) != 0 && dist_to_polyline(p, h, true) > tol) in_hole = true;
        if (!in_hole) return true;
    }
    return false;
}

double boundary_distance(const PolySet& s, Vec2 p) {
    double d = INFINITY;
    for (const auto& q : s) {
        d = std::min(d, dist_to_polyline(p, q.outer, true));
        for (const auto& h : q.holes) d = std::min(d, dist_to_polyline(p, h, true));
    }
    return d;
}

PolySet poly_buffer(const PolySet& s, double eps, int points_per_circle) {
    bg::strategy::buffer::distance_symmetric<double> dist(eps);
    bg::strategy::buffer::join_round join(points_per_circle);
    bg::strategy::buffer::end_round end(points_per_circle);
    bg::strategy::buffer::point_circle circle(points_per_circle);
    bg::strategy::buffer::side_straight side;
    BMulti out;
    bg::buffer(to_bg(s), out, dist, side, join, end, circle);
    return from_bg(out);
}

Loop convex_hull(const std::vector<Vec2>& pts) {
    bg::model::multi_point<BPoint> mp;
    for (auto p : pts) mp.push_back(BPoint(p.x, p.y));
    bg::model::ring<BPoint, false, true> hull;
    bg::convex_hull(mp, hull);
    return ring_to_loop(hull);
}

std::int64_t BoxGrid::key_of(Vec2 p) const {
    int i = static_cast<int>(std::floor((p.x - origin.x) / h));
    int j = static_cast<int>(std::floor((p.y - origin.y) / h));
    return key(i, j);
}

Vec2 BoxGrid::center(std::int64_t k) const {
    auto [i, j] = index(k);
    return {origin.x + (i + 0.5) * h, origin.y + (j + 0.5) * h};
}

Loop BoxGrid::box_loop(std::int64_t k) const {
    auto [i, j] = index(k);
    double x0 = origin.x + i * h, y0 = origin.y + j * h;
    return {{x0, y0}, {x0 + h, y0}, {x0 + h, y0 + h}, {x0, y0 + h}};
}

void normalize(BoxSet& s) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
}

BoxSet dilate(const BoxGrid& g, const BoxSet& s, int r) {
    BoxSet out;
    out.reserve(s.size() * (2 * r + 1) * (2 * r + 1));
    for (auto k : s) {
        auto [i, j] = g.index(k);
        for (int di = -r; di <= r; ++di)
            for (int dj = -r; dj <= r; ++dj) out.push_back(g.key(i + di, j + dj));
    }
    normalize(out);
    return out;
}

bool is_subset(const BoxSet& a, const BoxSet& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

BoxSet set_union(const BoxSet& a, const BoxSet& b) {
    BoxSet out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

bool has_box(const BoxSet& s, std::int64_t k) { return std::binary_search(s.begin(), s.end(), k); }

// cells of an (origin, h) grid met by segment ab, corner touches included
template <class F>
static void walk_cells(Vec2 origin, double h, Vec2 a, Vec2 b, F&& emit) {
    double ax = (a.x - origin.x) / h, ay = (a.y - origin.y) / h;
    double bx = (b.x - origin.x) / h, by = (b.y - origin.y) / h;
    int i = static_cast<int>(std::floor(ax)), j = static_cast<int>(std::floor(ay));
    int ie = static_cast<int>(std::floor(bx)), je = static_cast<int>(std::floor(by));
    double dx = bx - ax, dy = by - ay;
    int si = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
    int sj = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
    double tdx = si != 0 ? std::abs(1.0 / dx) : INFINITY;
    double tdy = sj != 0 ? std::abs(1.0 / dy) : INFINITY;
    double tmx = si > 0 ? (std::floor(ax) + 1 - ax) * tdx : (si < 0 ? (ax - std::floor(ax)) * tdx : INFINITY);
    double tmy = sj > 0 ? (std::floor(ay) + 1 - ay) * tdy : (sj < 0 ? (ay - std::floor(ay)) * tdy : INFINITY);
    emit(i, j);
    int guard = std::abs(ie - i) + std::abs(je - j) + 4;
    while ((i != ie || j != je) && guard-- > 0) {
        if (std::abs(tmx - tmy) < 1e-12) {
            emit(i + si, j);
            emit(i, j + sj);
            i += si;
            j += sj;
            tmx += tdx;
            tmy += tdy;
        } else if (tmx < tmy) {
            i += si;
            tmx += tdx;
        } else {
            j += sj;
            tmy += tdy;
        }
        emit(i, j);
    }
}

BoxSet rasterize_polyline(const BoxGrid& g, const Polyline& p, bool closed) {
    BoxSet out;
    std::size_t n = p.size();
    if (n == 0) return out;
    if (n == 1) return {g.key_of(p[0])};
    std::size_t m = closed ? n : n - 1;
    for (std::size_t s = 0; s < m; ++s)
        walk_cells(g.origin, g.h, p[s], p[(s + 1) % n], [&](int i, int j) { out.push_back(g.key(i, j)); });
    normalize(out);
    return out;
}

BoxSet rasterize_loop(const BoxGrid& g, const Loop& l) {
    BoxSet out = rasterize_polyline(g, l, true);
    BBox bb = bbox_of(l);
    int j0 = static_cast<int>(std::floor((bb.lo.y - g.origin.y) / g.h));
    int j1 = static_cast<int>(std::floor((bb.hi.y - g.origin.y) / g.h));
    for (int j = j0; j <= j1; ++j) {
        double yc = g.origin.y + (j + 0.5) * g.h;
        auto xs = crossings_h(l, yc, true);
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            int i0 = static_cast<int>(std::ceil((xs[k] - g.origin.x) / g.h - 0.5));
            int i1 = static_cast<int>(std::floor((xs[k + 1] - g.origin.x) / g.h - 0.5));
            for (int i = i0; i <= i1; ++i) out.push_back(g.key(i, j));
        }
    }
    normalize(out);
    return out;
}

std::vector<Loop> box_union_outlines(const BoxGrid& g, const BoxSet& s) {
    // directed CCW edges of every box; interior edges cancel
    using P = std::pair<int, int>;
    std::map<std::pair<P, P>, int> edges;
    for (auto k : s) {
        auto [i, j] = g.index(k);
        P c[4] = {{i, j}, {i + 1, j}, {i + 1, j + 1}, {i, j + 1}};
        for (int e = 0; e < 4; ++e) {
            P a = c[e], b = c[(e + 1) % 4];
            auto rev = edges.find({b, a});
            if (rev != edges.end())
                edges.erase(rev);
            else
                edges[{a, b}] = 1;
        }
    }
    std::multimap<P, P> out_edges;
    for (const auto& [e, _] : edges) out_edges.insert({e.first, e.second});
    std::vector<Loop> loops;
    while (!out_edges.empty()) {
        auto it = out_edges.begin();
        P start = it->first, prev = it->first, cur = it->second;
        out_edges.erase(it);
        std::vector<P> verts{start};
        while (cur != start) {
            verts.push_back(cur);
            auto [lo, hi] = out_edges.equal_range(cur);
            if (lo == hi) break;
            // prefer the leftmost turn so pinched corners split into separate loops
            auto best = lo;
            int din_x = cur.first - prev.first, din_y = cur.second - prev.second;
            int best_rank = 9;
            for (auto e = lo; e != hi; ++e) {
                int dx = e->second.first - cur.first, dy = e->second.second - cur.second;
                int c = din_x * dy - din_y * dx;
                int d = din_x * dx + din_y * dy;
                int rank = c > 0 ? 0 : (d > 0 ? 1 : 2);
                if (rank < best_rank) {
                    best_rank = rank;
                    best = e;
                }
            }
            prev = cur;
            cur = best->second;
            out_edges.erase(best);
        }
        Loop l;
        std::size_t n = verts.size();
        for (std::size_t v = 0; v < n; ++v) {
            P a = verts[(v + n - 1) % n], b = verts[v], c = verts[(v + 1) % n];
            int cr = (b.first - a.first) * (c.second - b.second) - (b.second - a.second) * (c.first - b.first);
            if (cr != 0) l.push_back({g.origin.x + b.first * g.h, g.origin.y + b.second * g.h});
        }
        if (l.size() >= 3 && signed_area(l) > 0) loops.push_back(std::move(l));
    }
    return loops;
}

std::vector<std::pair<Vec2, Vec2>> segments_of(const Polyline& p, bool closed) {
    std::vector<std::pair<Vec2, Vec2>> s;
    std::size_t n = p.size();
    if (n < 2) return s;
    std::size_t m = closed ? n : n - 1;
    for (std::size_t i = 0; i < m; ++i) s.push_back({p[i], p[(i + 1) % n]});
    return s;
}

SegmentIndex::SegmentIndex(std::vector<std::pair<Vec2, Vec2>> segs, double cell)
    : segs_(std::move(segs)), cell_(cell) {
    for (std::uint32_t s = 0; s < segs_.size(); ++s) {
        std::int64_t last = 0;
        bool have = false;
        walk_cells({0, 0}, cell_, segs_[s].first, segs_[s].second, [&](int i, int j) {
            std::int64_t k = cell_key(i, j);
            if (have && k == last) return;
            buckets_.push_back({k, s});
            last = k;
            have = true;
        });
    }
    std::sort(buckets_.begin(), buckets_.end());
    buckets_.erase(std::unique(buckets_.begin(), buckets_.end()), buckets_.end());
}

double SegmentIndex::nearest(Vec2 p, double max_r) const {
    int ci = static_cast<int>(std::floor(p.x / cell_)), cj = static_cast<int>(std::floor(p.y / cell_));
    double best = max_r;
    int rmax = static_cast<int>(std::ceil(max_r / cell_)) + 1;
    for (int r = 0; r <= rmax; ++r) {
        if ((r - 1) * cell_ > best) break;
        for (int di = -r; di <= r; ++di)
            for (int dj = -r; dj <= r; ++dj) {
                if (std::max(std::abs(di), std::abs(dj)) != r) continue;
                std::int64_t k = cell_key(ci + di, cj + dj);
                auto lo = std::lower_bound(buckets_.begin(), buckets_.end(), std::make_pair(k, std::uint32_t{0}));
                for (auto it = lo; it != buckets_.end() && it->first == k; ++it) {
                    const auto& sg = segs_[it->second];
                    best = std::min(best, dist_point_segment(p, sg.first, sg.second));
                }
            }
    }
    return best;
}

nlohmann::json to_json(const MonotoneCurve& c) {
    nlohmann::json s = nlohmann::json::array();
    for (auto p : c.samples) s.push_back({p.x, p.y});
    return {{"orientation", c.orientation == Orientation::U ? "U" : "S"},
            {"slope_bound", c.slope_bound},
            {"truncated", c.truncated},
            {"samples", s}};
}

MonotoneCurve curve_from_json(const nlohmann::json& j) {
    MonotoneCurve c;
    c.orientation = j.at("orientation").get<std::string>() == "U" ? Orientation::U : Orientation::S;
    c.slope_bound = j.at("slope_bound").get<double>();
    c.truncated = j.value("truncated", false);
    for (const auto& p : j.at("samples")) c.samples.push_back({p[0].get<double>(), p[1].get<double>()});
    return c;
}

nlohmann::json to_json(const Rectangle& r) {
    return {{"left", to_json(r.left)}, {"right", to_json(r.right)}, {"lower", to_json(r.lower)}, {"upper", to_json(r.upper)}};
}

Rectangle rectangle_from_json(const nlohmann::json& j) {
    return {curve_from_json(j.at("left")), curve_from_json(j.at("right")), curve_from_json(j.at("lower")),
            curve_from_json(j.at("upper"))};
}

}  // namespace lozi
