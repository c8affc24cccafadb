#include "lozilab/attractor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace lozi {

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::PASS: return "PASS";
        case Verdict::FAIL: return "FAIL";
        default: return "INDETERMINATE";
    }
}

std::string to_string(MixingVerdict v) {
    switch (v) {
        case MixingVerdict::MIXING_CONSISTENT: return "MIXING-CONSISTENT";
        case MixingVerdict::TRANSITIVE_CONSISTENT: return "TRANSITIVE-CONSISTENT";
        case MixingVerdict::NOT_TRANSITIVE: return "NOT-TRANSITIVE";
        default: return "INDETERMINATE";
    }
}

RegionPolygon region_from_loop(Loop l) {
    if (signed_area(l) < 0) std::reverse(l.begin(), l.end());
    return {std::move(l), {}};
}

double area(const RegionPolygon& r) {
    double a = std::abs(signed_area(r.boundary));
    for (const auto& h : r.holes) a -= std::abs(signed_area(h));
    return a;
}

bool region_contains(const RegionPolygon& r, Vec2 p, double tol) {
    if (!point_in_loop(r.boundary, p, tol)) return false;
    for (const auto& h : r.holes)
        if (winding_number(h, p) != 0 && dist_to_polyline(p, h, true) > tol) return false;
    return true;
}

BoxGrid grid_for(const BBox&, double h) { return BoxGrid{{0.0, 0.0}, h}; }

namespace {

using Seg = std::pair<Vec2, Vec2>;

// uniform buckets for segment crossing queries
class SegGrid {
public:
    explicit SegGrid(std::vector<Seg> segs) : segs_(std::move(segs)) {
        for (const auto& s : segs_) {
            bb_.add(s.first);
            bb_.add(s.second);
        }
        double total = 0;
        for (const auto& s : segs_) total += norm(s.second - s.first);
        cell_ = std::max(segs_.empty() ? 1.0 : 2.0 * total / segs_.size(), bb_.diam() / 1024 + 1e-300);
        for (std::uint32_t i = 0; i < segs_.size(); ++i) {
            auto [a, b] = segs_[i];
            auto [i0, j0] = cell(Vec2{std::min(a.x, b.x), std::min(a.y, b.y)});
            auto [i1, j1] = cell(Vec2{std::max(a.x, b.x), std::max(a.y, b.y)});
            for (int u = i0; u <= i1; ++u)
                for (int v = j0; v <= j1; ++v) buckets_.push_back({key(u, v), i});
        }
        std::sort(buckets_.begin(), buckets_.end());
    }

    bool crosses(Vec2 a, Vec2 b) const {
        auto [i0, j0] = cell(Vec2{std::min(a.x, b.x), std::min(a.y, b.y)});
        auto [i1, j1] = cell(Vec2{std::max(a.x, b.x), std::max(a.y, b.y)});
        if (static_cast<double>(i1 - i0 + 1) * (j1 - j0 + 1) > 4e6) return brute(a, b);
        for (int u = i0; u <= i1; ++u)
            for (int v = j0; v <= j1; ++v) {
                auto k = key(u, v);
                auto it = std::lower_bound(buckets_.begin(), buckets_.end(), std::make_pair(k, std::uint32_t{0}));
                for (; it != buckets_.end() && it->first == k; ++it) {
                    const auto& s = segs_[it->second];
                    if (segment_intersection(a, b, s.first, s.second)) return true;
                }
            }
        return false;
    }

private:
    std::vector<Seg> segs_;
    BBox bb_;
    double cell_ = 1;
    std::vector<std::pair<std::int64_t, std::uint32_t>> buckets_;

    std::pair<int, int> cell(Vec2 p) const {
        double cx = std::clamp((p.x - bb_.lo.x) / cell_, -1.0, 2e9);
        double cy = std::clamp((p.y - bb_.lo.y) / cell_, -1.0, 2e9);
        return {static_cast<int>(std::floor(cx)), static_cast<int>(std::floor(cy))};
    }
    static std::int64_t key(int i, int j) {
        return (static_cast<std::int64_t>(i) << 32) ^ static_cast<std::uint32_t>(j);
    }
    bool brute(Vec2 a, Vec2 b) const {
        for (const auto& s : segs_)
            if (segment_intersection(a, b, s.first, s.second)) return true;
        return false;
    }
};

std::optional<Vec2> interior_point(const RegionPolygon& r) {
    BBox bb = bbox_of(r.boundary);
    Vec2 c{0, 0};
    for (auto p : r.boundary) c = c + p;
    c = c / static_cast<double>(r.boundary.size());
    if (region_contains(r, c) && dist_to_polyline(c, r.boundary, true) > 0) return c;
    for (int n = 8; n <= 512; n *= 2)
        for (int i = 1; i < n; ++i)
            for (int j = 1; j < n; ++j) {
                Vec2 p{bb.lo.x + (bb.hi.x - bb.lo.x) * i / n, bb.lo.y + (bb.hi.y - bb.lo.y) * j / n};
                if (region_contains(r, p) && dist_to_polyline(p, r.boundary, true) > 0) return p;
            }
    return std::nullopt;
}

bool in_union(const std::vector<RegionPolygon>& U, Vec2 p) {
    for (const auto& r : U)
        if (region_contains(r, p, 0.0)) return true;
    return false;
}

BoxSet difference(const BoxSet& a, const BoxSet& b) {
    BoxSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

BoxSet cover_points(const BoxGrid& g, const std::vector<Vec2>& pts) {
    BoxSet s;
    s.reserve(pts.size());
    for (auto p : pts)
        if (std::isfinite(p.x) && std::isfinite(p.y)) s.push_back(g.key_of(p));
    normalize(s);
    return s;
}

}  // namespace

namespace {

// image loops and mapped interior points against a union of regions
TrappingReport containment(const std::vector<Loop>& images, const std::vector<Vec2>& inner,
                           const std::vector<RegionPolygon>& U, double touch_tol) {
    TrappingReport rep;
    std::vector<Seg> bsegs;
    BBox bb;
    for (const auto& r : U) {
        if (r.boundary.size() < 3) {
            rep.detail = "degenerate boundary";
            return rep;
        }
        for (auto s : segments_of(r.boundary, true)) bsegs.push_back(s);
        for (const auto& h : r.holes)
            for (auto s : segments_of(h, true)) bsegs.push_back(s);
        for (auto p : r.boundary) bb.add(p);
    }
    double diam = bb.diam();
    SegGrid cross_idx(bsegs);
    SegmentIndex near_b(bsegs, std::max(diam / 512, 1e-12));

    std::vector<Seg> isegs;
    double margin = INFINITY;
    bool outside = false;
    double worst_out = 0;
    for (const auto& img : images) {
        rep.image_vertices += img.size();
        for (auto p : img) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
                rep.detail = "image not finite";
                rep.margin = -INFINITY;
                return rep;
            }
            double d = near_b.nearest(p, 2 * diam + 1);
            if (!in_union(U, p)) {
                outside = true;
                worst_out = std::max(worst_out, d);
            } else {
                margin = std::min(margin, d);
            }
        }
        auto segs = segments_of(img, true);
        for (const auto& s : segs)
            if (!outside && cross_idx.crosses(s.first, s.second)) {
                outside = true;
                rep.detail = "image boundary crosses the region boundary";
            }
        isegs.insert(isegs.end(), segs.begin(), segs.end());
    }
    for (auto c : inner)
        if (!in_union(U, c)) {
            outside = true;
            rep.detail = "interior point leaves";
        }
    if (outside) {
        rep.verdict = worst_out < touch_tol * (1 + diam) ? Verdict::INDETERMINATE : Verdict::FAIL;
        rep.margin = -worst_out;
        if (rep.detail.empty()) rep.detail = "image boundary leaves the region";
        return rep;
    }
    // boundary vertices of U against the image segments close the segment-segment distance
    SegmentIndex near_i(isegs, std::max(diam / 512, 1e-12));
    for (const auto& s : bsegs) margin = std::min(margin, near_i.nearest(s.first, std::min(margin, 2 * diam + 1)));
    rep.margin = margin;
    if (margin <= touch_tol * (1 + diam)) {
        rep.verdict = Verdict::INDETERMINATE;
        rep.detail = "image boundary touches the region boundary";
    } else {
        rep.verdict = Verdict::PASS;
    }
    return rep;
}

std::vector<RegionPolygon> regions_of(const PolySet& s) {
    std::vector<RegionPolygon> out;
    for (const auto& p : s) {
        RegionPolygon r = region_from_loop(p.outer);
        r.holes = p.holes;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

TrappingReport verify_trapping(const PiecewiseMap& m, const std::vector<RegionPolygon>& U, double touch_tol) {
    if (U.empty()) {
        TrappingReport rep;
        rep.detail = "empty region";
        return rep;
    }
    std::vector<Loop> images;
    std::vector<Vec2> inner;
    for (const auto& r : U) {
        if (r.boundary.size() < 3) continue;
        images.push_back(image_loop(m, r.boundary));
        for (const auto& h : r.holes) images.push_back(image_loop(m, h));
        if (auto c = interior_point(r)) inner.push_back(m(*c));
    }
    return containment(images, inner, U, touch_tol);
}

TrappingReport verify_trapping(const PiecewiseMap& m, const RegionPolygon& U, double touch_tol) {
    return verify_trapping(m, std::vector<RegionPolygon>{U}, touch_tol);
}

std::optional<Vec2> unstable_turn(const PiecewiseMap& m) {
    FixedPoint X = fixed_points(m).X;
    if (!X.hyperbolic || norm(X.v_u) == 0.0) return std::nullopt;
    Polyline di = divider_image(m, -8, 8);
    Vec2 u = X.v_u / norm(X.v_u);
    std::optional<Vec2> best;
    for (std::size_t i = 0; i + 1 < di.size(); ++i)
        if (auto q = segment_intersection(X.z - 20 * u, X.z + 20 * u, di[i], di[i + 1]))
            if (!best || norm(*q - X.z) < norm(*best - X.z)) best = q;
    return best;
}

std::optional<RegionPolygon> turn_region(const PiecewiseMap& m, double r, int turns, double stretch) {
    auto Z = unstable_turn(m);
    if (!Z) return std::nullopt;
    std::vector<Vec2> pts;
    Vec2 z = *Z;
    for (int j = 0; j < turns; ++j) {
        double ex = 1.5 * r * std::pow(stretch, j);
        for (int k = 0; k < 32; ++k) {
            double th = 2 * M_PI * k / 32;
            pts.push_back(z + Vec2{ex * std::cos(th), r * std::sin(th)});
        }
        z = m(z);
    }
    Loop hull = convex_hull(pts);
    if (hull.size() < 3) return std::nullopt;
    return region_from_loop(hull);
}

BoxSet image_cover(const PiecewiseMap& m, const BoxGrid& g, const BoxSet& s) {
    BoxSet out;
    for (auto k : s) {
        Loop img = image_loop(m, g.box_loop(k));
        BoxSet c = rasterize_loop(g, img);
        out.insert(out.end(), c.begin(), c.end());
    }
    normalize(out);
    return out;
}

ClosureResult trapping_closure(const PiecewiseMap& m, const BoxGrid& g, const BoxSet& seed, int max_steps,
                               std::size_t box_cap, int dilation) {
    ClosureResult r;
    r.boxes = seed;
    BoxSet frontier = seed;
    r.sizes.push_back(seed.size());
    while (r.steps < max_steps) {
        BoxSet img = dilate(g, image_cover(m, g, frontier), dilation);
        ++r.steps;
        r.sizes.push_back(img.size());
        frontier = difference(img, r.boxes);
        if (frontier.empty()) {
            r.closed = true;
            return r;
        }
        r.boxes = set_union(r.boxes, frontier);
        if (r.boxes.size() > box_cap) {
            r.detail = "box cap exceeded at step " + std::to_string(r.steps);
            return r;
        }
    }
    r.detail = "not closed after " + std::to_string(max_steps) + " steps";
    return r;
}

std::vector<RegionPolygon> outline_regions(const BoxGrid& g, const BoxSet& s) {
    std::vector<RegionPolygon> out;
    for (auto& l : box_union_outlines(g, s)) out.push_back(region_from_loop(std::move(l)));
    return out;
}

GResult make_G(const PiecewiseMap& m, double h) {
    GResult G;
    G.h = h;
    for (double r : {1e-3, 1e-2, 1e-4})
        if (auto T = turn_region(m, r)) {
            auto rep = verify_trapping(m, *T);
            if (rep.pass()) {
                G.regions = {*T};
                G.method = "turns";
                G.trapping = rep;
                return G;
            }
        }
    FixedPoint X = fixed_points(m).X;
    Vec2 z = X.z + (norm(X.v_u) > 0 ? X.v_u * (1e-6 / norm(X.v_u)) : Vec2{1e-6, 0});
    std::vector<Vec2> orbit;
    for (int i = 0; i < 21000; ++i) {
        z = m(z);
        if (!std::isfinite(z.x) || norm(z) > 1e6) {
            G.method = "closure";
            G.trapping.detail = "orbit escapes";
            return G;
        }
        if (i >= 1000) orbit.push_back(z);
    }
    BoxGrid g = grid_for(bbox_of(orbit), h);
    auto cl = trapping_closure(m, g, dilate(g, cover_points(g, orbit), 1));
    G.method = "closure";
    if (!cl.closed) {
        G.trapping.detail = cl.detail;
        return G;
    }
    G.regions = outline_regions(g, cl.boxes);
    G.trapping = verify_trapping(m, G.regions);
    return G;
}

AttractorApprox iterate_region(const PiecewiseMap& m, const RegionPolygon& F, int n, const BoxGrid& grid,
                               std::size_t vertex_cap) {
    AttractorApprox att;
    att.grid = grid;
    double sp = grid.h / 2;
    BBox bb = bbox_of(F.boundary);
    for (double y = std::floor(bb.lo.y / sp) * sp; y <= bb.hi.y; y += sp)
        for (double x = std::floor(bb.lo.x / sp) * sp; x <= bb.hi.x; x += sp)
            if (region_contains(F, {x, y})) att.points.push_back({x, y});
    Polyline closed = F.boundary;
    closed.push_back(F.boundary.front());
    att.boundary = {closed};
    BoxSet prev;
    auto cover = [&]() {
        BoxSet c = cover_points(grid, att.points);
        if (!att.boundary_capped)
            for (const auto& pl : att.boundary) {
                BoxSet b = rasterize_polyline(grid, pl, false);
                c.insert(c.end(), b.begin(), b.end());
            }
        if (att.generation == 0) {
            BoxSet f = rasterize_loop(grid, F.boundary);
            c.insert(c.end(), f.begin(), f.end());
        }
        normalize(c);
        return c;
    };
    att.boxes = cover();
    att.cover_sizes.push_back(att.boxes.size());
    att.nested.push_back(true);
    for (int k = 1; k <= n; ++k) {
        for (auto& p : att.points) p = m(p);
        if (!att.boundary_capped) {
            std::vector<Polyline> next;
            std::size_t verts = 0;
            for (const auto& pl : att.boundary)
                for (auto& piece : image_polyline(m, pl)) {
                    verts += piece.size();
                    next.push_back(std::move(piece));
                }
            if (verts > vertex_cap) {
                att.boundary_capped = true;
            } else {
                att.boundary = std::move(next);
                att.boundary_generations = k;
            }
        }
        att.generation = k;
        prev = std::move(att.boxes);
        att.boxes = cover();
        att.cover_sizes.push_back(att.boxes.size());
        att.nested.push_back(is_subset(att.boxes, dilate(grid, prev, 1)));
    }
    return att;
}

AttractorApprox attractor_from_orbit(const PiecewiseMap& m, Vec2 z0, std::size_t n_points, const BoxGrid& grid,
                                     std::size_t burn_in) {
    AttractorApprox att;
    att.grid = grid;
    Vec2 z = z0;
    for (std::size_t i = 0; i < burn_in; ++i) z = m(z);
    att.points.reserve(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
        att.points.push_back(z);
        z = m(z);
    }
    att.generation = static_cast<int>(burn_in + n_points);
    att.boxes = cover_points(grid, att.points);
    att.cover_sizes = {att.boxes.size()};
    att.nested = {true};
    att.boundary_capped = true;
    return att;
}

bool forward_invariant(const PiecewiseMap& m, const AttractorApprox& att) {
    BoxSet d = dilate(att.grid, att.boxes, 1);
    for (auto p : att.points)
        if (!has_box(d, att.grid.key_of(m(p)))) return false;
    return true;
}

HausdorffReport hausdorff_attractor_vs_unstable(const AttractorApprox& att, const ManifoldApprox& wu) {
    HausdorffReport rep;
    const BoxGrid& g = att.grid;
    std::vector<Seg> segs;
    std::vector<Vec2> wpts;
    double sp = g.h / 4;
    for (const auto& pl : wu.polylines()) {
        for (auto s : segments_of(pl, false)) {
            segs.push_back(s);
            int k = std::max(1, static_cast<int>(std::ceil(norm(s.second - s.first) / sp)));
            for (int i = 0; i < k; ++i) wpts.push_back(lerp(s.first, s.second, static_cast<double>(i) / k));
        }
        if (!pl.empty()) wpts.push_back(pl.back());
    }
    if (segs.empty() || att.boxes.empty()) {
        rep.distance = INFINITY;
        return rep;
    }
    SegmentIndex idx(segs, g.h * 4);
    for (auto k : att.boxes) {
        Vec2 c = g.center(k);
        double d = idx.nearest(c, 1e3);
        if (d > rep.cover_to_wu) {
            rep.cover_to_wu = d;
            rep.worst_cover = c;
        }
    }
    for (auto w : wpts) {
        auto [i0, j0] = g.index(g.key_of(w));
        double best = INFINITY;
        for (int r = 0; r < 100000; ++r) {
            for (int i = i0 - r; i <= i0 + r; ++i)
                for (int j = j0 - r; j <= j0 + r; ++j) {
                    if (std::max(std::abs(i - i0), std::abs(j - j0)) != r) continue;
                    auto k = g.key(i, j);
                    if (has_box(att.boxes, k)) best = std::min(best, norm(g.center(k) - w));
                }
            if (best < (r + 0.5) * g.h) break;
        }
        if (best > rep.wu_to_cover) {
            rep.wu_to_cover = best;
            rep.worst_wu = w;
        }
    }
    rep.distance = std::max(rep.cover_to_wu, rep.wu_to_cover);
    return rep;
}

MixingReport mixing_matrix(const PiecewiseMap& m, const AttractorApprox& att, int steps, int samples_per_side) {
    MixingReport rep;
    const BoxSet& B = att.boxes;
    std::size_t N = B.size();
    rep.nodes = N;
    if (N == 0) return rep;
    auto idx = [&](std::int64_t k) -> std::ptrdiff_t {
        auto it = std::lower_bound(B.begin(), B.end(), k);
        return (it != B.end() && *it == k) ? it - B.begin() : -1;
    };
    std::vector<std::vector<std::uint32_t>> succ(N);
    for (auto p : att.points) {
        auto a = idx(att.grid.key_of(p));
        auto b = idx(att.grid.key_of(m(p)));
        if (a < 0) continue;
        if (b < 0) {
            ++rep.leaked;
            continue;
        }
        succ[a].push_back(static_cast<std::uint32_t>(b));
    }
    // preimages give every occupied box an incoming edge when they stay on the cover
    for (auto p : att.points) {
        auto q = inverse(m, p);
        if (!q) continue;
        auto a = idx(att.grid.key_of(*q));
        auto b = idx(att.grid.key_of(p));
        if (a >= 0 && b >= 0) succ[a].push_back(static_cast<std::uint32_t>(b));
    }
    const BoxGrid& g = att.grid;
    for (std::size_t i = 0; i < N; ++i) {
        auto [bi, bj] = g.index(B[i]);
        for (int u = 0; u < samples_per_side; ++u)
            for (int w = 0; w < samples_per_side; ++w) {
                Vec2 p{g.origin.x + (bi + (u + 0.5) / samples_per_side) * g.h,
                       g.origin.y + (bj + (w + 0.5) / samples_per_side) * g.h};
                auto b = idx(g.key_of(m(p)));
                if (b < 0)
                    ++rep.leaked;
                else
                    succ[i].push_back(static_cast<std::uint32_t>(b));
            }
    }
    std::vector<std::vector<std::uint32_t>> pred(N);
    for (std::size_t i = 0; i < N; ++i) {
        auto& s = succ[i];
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
        if (s.empty()) ++rep.empty_rows;
        rep.edges += s.size();
        for (auto j : s) pred[j].push_back(static_cast<std::uint32_t>(i));
    }
    if (rep.empty_rows > 0) return rep;
    auto reach_all = [&](const std::vector<std::vector<std::uint32_t>>& adj) {
        std::vector<char> seen(N, 0);
        std::vector<std::uint32_t> st{0};
        seen[0] = 1;
        std::size_t cnt = 1;
        while (!st.empty()) {
            auto v = st.back();
            st.pop_back();
            for (auto w : adj[v])
                if (!seen[w]) {
                    seen[w] = 1;
                    ++cnt;
                    st.push_back(w);
                }
        }
        return cnt == N;
    };
    rep.strongly_connected = reach_all(succ) && reach_all(pred);
    if (!rep.strongly_connected) {
        rep.verdict = MixingVerdict::NOT_TRANSITIVE;
        return rep;
    }
    if (N < 2 || N > 60000) {
        rep.verdict = MixingVerdict::TRANSITIVE_CONSISTENT;
        return rep;
    }
    // rows of M^k as bitsets: R_k(i) = OR over successors j of R_{k-1}(j)
    std::size_t W = (N + 63) / 64;
    std::vector<std::uint64_t> cur(N * W, 0), nxt(N * W, 0);
    for (std::size_t i = 0; i < N; ++i)
        for (auto j : succ[i]) cur[i * W + j / 64] |= std::uint64_t{1} << (j % 64);
    std::uint64_t last_mask = (N % 64) ? ((std::uint64_t{1} << (N % 64)) - 1) : ~std::uint64_t{0};
    auto full = [&](const std::vector<std::uint64_t>& M) {
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t w = 0; w + 1 < W; ++w)
                if (M[i * W + w] != ~std::uint64_t{0}) return false;
            if ((M[i * W + W - 1] & last_mask) != last_mask) return false;
        }
        return true;
    };
    for (int k = 1; k <= steps; ++k) {
        if (full(cur)) {
            rep.positive_power = k;
            rep.verdict = MixingVerdict::MIXING_CONSISTENT;
            return rep;
        }
        if (k == steps) break;
        std::fill(nxt.begin(), nxt.end(), 0);
        for (std::size_t i = 0; i < N; ++i) {
            std::uint64_t* dst = &nxt[i * W];
            for (auto j : succ[i]) {
                const std::uint64_t* src = &cur[j * W];
                for (std::size_t w = 0; w < W; ++w) dst[w] |= src[w];
            }
        }
        std::swap(cur, nxt);
    }
    rep.verdict = MixingVerdict::TRANSITIVE_CONSISTENT;
    return rep;
}

BasinEstimate basin_fraction(const PiecewiseMap& m, const AttractorApprox& att, const RegionPolygon& sample_box,
                             std::size_t n_samples, int horizon, std::uint64_t seed, int threads) {
    BasinEstimate est;
    est.sample_box = sample_box;
    est.n_samples = n_samples;
    est.horizon = horizon;
    est.tail = std::min(horizon, std::max(1000, horizon / 10));
    est.h = att.grid.h;
    est.seed = seed;
    if (n_samples == 0) return est;
    std::mt19937_64 rng(seed);
    BBox bb = bbox_of(sample_box.boundary);
    std::uniform_real_distribution<double> ux(bb.lo.x, bb.hi.x), uy(bb.lo.y, bb.hi.y);
    std::vector<Vec2> starts;
    starts.reserve(n_samples);
    while (starts.size() < n_samples) {
        Vec2 p{ux(rng), uy(rng)};
        if (region_contains(sample_box, p)) starts.push_back(p);
    }
    BoxSet near = dilate(att.grid, att.boxes, 1);
    std::vector<char> ok(n_samples, 0);
    auto work = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t s = lo; s < hi; ++s) {
            Vec2 z = starts[s];
            bool good = true;
            for (int t = 1; t <= horizon && good; ++t) {
                z = m(z);
                if (!std::isfinite(z.x) || !std::isfinite(z.y) || std::abs(z.x) + std::abs(z.y) > 1e8)
                    good = false;
                else if (t > horizon - est.tail && !has_box(near, att.grid.key_of(z)))
                    good = false;
            }
            ok[s] = good;
        }
    };
    unsigned nt = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
    nt = std::min<unsigned>(nt, static_cast<unsigned>(n_samples));
    std::vector<std::thread> pool;
    std::size_t chunk = (n_samples + nt - 1) / nt;
    for (unsigned t = 0; t < nt; ++t) {
        std::size_t lo = t * chunk, hi = std::min(n_samples, lo + chunk);
        if (lo < hi) pool.emplace_back(work, lo, hi);
    }
    for (auto& th : pool) th.join();
    std::size_t hits = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 1));
    est.fraction_converging = static_cast<double>(hits) / n_samples;
    double p = est.fraction_converging;
    est.std_error = std::sqrt(p * (1 - p) / n_samples);
    return est;
}

std::vector<Loop> forward_union(const PiecewiseMap& m, const Loop& H0, const BoxGrid& g, int cap) {
    std::vector<Loop> H{H0};
    BoxSet cover = rasterize_loop(g, H0);
    Loop z = H0;
    for (int i = 1; i <= cap; ++i) {
        z = image_loop(m, z);
        BoxSet c = rasterize_loop(g, z);
        if (is_subset(c, cover)) return H;
        H.push_back(z);
        cover = set_union(cover, c);
    }
    return H;
}

namespace {

std::vector<Loop> loops_of(const std::vector<RegionPolygon>& rs) {
    std::vector<Loop> out;
    for (const auto& r : rs) {
        out.push_back(r.boundary);
        for (const auto& h : r.holes) out.push_back(h);
    }
    return out;
}

std::vector<RegionPolygon> union_regions(const std::vector<Loop>& loops) {
    std::vector<PolySet> parts;
    for (const auto& l : loops) parts.push_back(polyset(l));
    return regions_of(poly_union_all(parts));
}

PolySet to_polyset(const std::vector<RegionPolygon>& rs) {
    PolySet s;
    for (const auto& r : rs) s.push_back(Poly{r.boundary, r.holes});
    return s;
}

}  // namespace

VResult construct_V(const PiecewiseMap& m, const std::vector<Loop>& H, const BoxGrid& g, int p_cap) {
    VResult v;
    auto HU = union_regions(H);
    // images f^n(H), n = 1..p+1
    std::vector<std::vector<Loop>> imgs{H};
    double margin0 = 0;
    for (int k = 1; k <= p_cap; ++k) {
        std::vector<Loop> nxt;
        std::size_t verts = 0;
        for (const auto& l : imgs.back()) {
            nxt.push_back(image_loop(m, l));
            verts += nxt.back().size();
        }
        imgs.push_back(std::move(nxt));
        if (verts > 2000000) {
            v.detail = "boundary vertex cap reached at n=" + std::to_string(k);
            return v;
        }
        auto rep = containment(imgs.back(), {}, HU, 1e-12);
        if (rep.pass()) {
            v.p = k - 1;
            margin0 = rep.margin;
            break;
        }
    }
    if (v.p < 0) {
        v.detail = "no p <= " + std::to_string(p_cap) + " with f^{p+1}(H) inside int H";
        return v;
    }
    // V_0 between f^{p+1}(H) and int H, then V_n a neighbourhood of f(cl V_{n-1}) inside f^n(int H)
    PolySet top = to_polyset(union_regions(imgs[v.p + 1]));
    PolySet Vn = poly_buffer(top, margin0 / 2);
    v.eps.push_back(margin0 / 2);
    std::vector<PolySet> parts{Vn};
    for (int n = 1; n <= v.p; ++n) {
        std::vector<Loop> fl;
        for (const auto& poly : Vn) {
            fl.push_back(image_loop(m, poly.outer));
            for (const auto& h : poly.holes) fl.push_back(image_loop(m, h));
        }
        auto host = union_regions(imgs[n]);
        auto rep = containment(fl, {}, host, 1e-12);
        if (!rep.pass()) {
            v.detail = "margin collapse at n=" + std::to_string(n) + ": " + rep.detail;
            return v;
        }
        Vn = poly_buffer(to_polyset(union_regions(fl)), rep.margin / 2);
        v.eps.push_back(rep.margin / 2);
        parts.push_back(Vn);
    }
    PolySet V = poly_union_all(parts);
    // bounded complementary components are part of V
    for (auto& poly : V) poly.holes.clear();
    v.regions = regions_of(V);
    v.steps = v.p + 1;
    v.trapping = verify_trapping(m, v.regions);
    auto inside = containment(loops_of(v.regions), {}, HU, 1e-12);
    v.inside_H_exact = inside.pass();
    v.H_margin = inside.margin;
    BoxSet coverH, coverV;
    for (const auto& l : H) coverH = set_union(coverH, rasterize_loop(g, l));
    for (const auto& r : v.regions) coverV = set_union(coverV, rasterize_loop(g, r.boundary));
    v.boxes = coverV;
    v.inside_H = is_subset(coverV, coverH);
    v.ok = v.inside_H && v.inside_H_exact && v.trapping.pass();
    if (!v.inside_H_exact) v.detail = "V leaves H";
    return v;
}

LReport check_L_conditions(const PiecewiseMap& m, const std::optional<AffineCones>& cones, const GResult& G) {
    LReport rep;
    BBox bb;
    for (const auto& r : G.regions)
        for (auto p : r.boundary) bb.add(p);
    SampleRegion region;
    if (!bb.empty()) region = {bb.lo, bb.hi};
    auto vol = check_volume_contraction(m, 10000, region);
    rep.det_max = vol.det_max;
    rep.L1 = vol.pass ? Verdict::PASS : Verdict::FAIL;

    if (cones && !cones->m0_like) {
        rep.lambda = cones->lambda;
        rep.L3 = rep.lambda > std::sqrt(2.0) ? Verdict::PASS : Verdict::FAIL;
    } else if (!cones && m.affine()) {
        rep.L3 = Verdict::FAIL;
        rep.detail += "no invariant cones; ";
    }

    rep.trapping_margin = G.trapping.margin;
    if (G.regions.empty()) {
        rep.L2 = G.trapping.verdict == Verdict::INDETERMINATE ? Verdict::INDETERMINATE : Verdict::FAIL;
        rep.detail += "no trapping region; ";
        return rep;
    }
    bool disc = G.regions.size() == 1 && G.regions[0].holes.empty() && loop_is_simple(G.regions[0].boundary);
    const Loop& gl = G.regions[0].boundary;
    bool meets = false, neg = false, pos = false;
    for (auto p : gl) (m.divider.side(p) < 0 ? neg : pos) = true;
    meets = neg && pos;
    if (G.trapping.verdict == Verdict::INDETERMINATE)
        rep.L2 = Verdict::INDETERMINATE;
    else
        rep.L2 = (G.trapping.pass() && disc && meets) ? Verdict::PASS : Verdict::FAIL;
    if (!disc) rep.detail += "G is not a single disc; ";
    if (!disc) return rep;

    FixedPoint X = fixed_points(m).X;
    if (!X.hyperbolic || !point_in_loop(gl, X.z, 0.0)) {
        rep.L4 = Verdict::FAIL;
        rep.detail += "X outside G; ";
        return rep;
    }
    bool chord_ok = true;
    BBox gb = bbox_of(gl);
    for (const auto& piece : clip_polyline(divider_polyline(m, gb.lo.y - 1, gb.hi.y + 1, 64), gl))
        for (auto p : image_polyline(m, piece))
            for (auto q : p)
                if (m.divider.side(q) <= 0) chord_ok = false;
    Vec2 vs = X.v_s / norm(X.v_s);
    double L = 4 * gb.diam() + 1;
    Polyline line{X.z - L * vs, X.z + L * vs};
    Polyline loc;
    for (const auto& piece : split_at_divider(m, line))
        if (piece.size() >= 2 && dist_to_polyline(X.z, piece, false) < 1e-12) loc = piece;
    if (loc.size() < 2) loc = line;
    Vec2 a = loc.front(), b = loc.back();
    Vec2 nrm{-vs.y, vs.x};
    double w = 1e-9 * (1 + gb.diam());
    Loop band{a - w * nrm, b - w * nrm, b + w * nrm, a + w * nrm};
    PolySet parts = poly_difference(polyset(image_loop(m, gl)), polyset(band));
    rep.L4_components = static_cast<int>(parts.size());
    int upper = 0, lower = 0, right = 0;
    for (const auto& p : parts) {
        bool all_up = true, all_down = true, all_right = true;
        for (auto q : p.outer) {
            double ht = height_over_image(m, q);
            if (ht < -w) all_up = false;
            if (ht > w) all_down = false;
            if (m.divider.side(q) < -w) all_right = false;
        }
        if (all_right)
            ++right;
        else if (all_up)
            ++upper;
        else if (all_down)
            ++lower;
    }
    bool three = parts.size() == 3 && upper == 1 && lower == 1 && right == 1;
    rep.L4 = (three && chord_ok) ? Verdict::PASS : Verdict::FAIL;
    if (!chord_ok) rep.detail += "f(G cap R0) leaves R+; ";
    if (!three) rep.detail += "f(G) minus W^s_loc(X) has " + std::to_string(parts.size()) + " components; ";
    return rep;
}

}  // namespace lozi
