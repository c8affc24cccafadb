#include "lozilab/manifolds.hpp"

#include <algorithm>
#include <unordered_map>

namespace lozi {

double ManifoldApprox::total_length() const {
    double s = 0;
    for (const auto& p : pieces) s += p.length();
    return s;
}

std::vector<Polyline> ManifoldApprox::polylines() const {
    std::vector<Polyline> out;
    out.reserve(pieces.size());
    for (const auto& p : pieces) out.push_back(p.samples);
    return out;
}

namespace {

Polyline dedupe(const Polyline& p) {
    Polyline q;
    for (auto z : p)
        if (q.empty() || norm(z - q.back()) > 1e-10) q.push_back(z);
    return q;
}

// parameter where the ray z + t v first meets the divider, t > 0
std::optional<double> divider_hit(const PiecewiseMap& m, Vec2 z, Vec2 v, double tmax) {
    double s0 = m.divider.side(z);
    if (m.divider.linear) {
        double den = v.x - m.divider.k * v.y;
        if (den == 0.0) return std::nullopt;
        double t = -s0 / den;
        if (t > 0 && t <= tmax) return t;
        return std::nullopt;
    }
    const int N = 400;
    double prev = 0;
    for (int i = 1; i <= N; ++i) {
        double t = tmax * i / N;
        if ((m.divider.side(z + v * t) < 0) != (s0 < 0)) {
            double lo = prev, hi = t;
            for (int k = 0; k < 80; ++k) {
                double mid = 0.5 * (lo + hi);
                if ((m.divider.side(z + v * mid) < 0) != (s0 < 0))
                    hi = mid;
                else
                    lo = mid;
            }
            return hi;
        }
        prev = t;
    }
    return std::nullopt;
}

double window_exit(const PiecewiseMap& m, Vec2 z, Vec2 v) {
    double t = INFINITY;
    const Window& w = m.window;
    if (v.x > 0) t = std::min(t, (w.hi.x - z.x) / v.x);
    if (v.x < 0) t = std::min(t, (w.lo.x - z.x) / v.x);
    if (v.y > 0) t = std::min(t, (w.hi.y - z.y) / v.y);
    if (v.y < 0) t = std::min(t, (w.lo.y - z.y) / v.y);
    return std::max(t, 0.0);
}

ManifoldApprox local_segment(const PiecewiseMap& m, const FixedPoint& p, Vec2 dir, ManSide side, const Cone& k) {
    Vec2 v = dir * (1.0 / norm(dir));
    double tp = window_exit(m, p.z, v), tm = window_exit(m, p.z, -v);
    auto hp = divider_hit(m, p.z, v, tp);
    auto hm = divider_hit(m, p.z, -v, tm);
    double L;
    if (hp && hm)
        L = std::min(*hp, *hm);
    else if (hp)
        L = *hp;
    else if (hm)
        L = *hm;
    else
        L = std::min(tp, tm);
    if (!m.branch(p.side).affine) L = std::min(L, 1e-3);
    ManifoldApprox a;
    a.base = p;
    a.side = side;
    a.governing = k;
    Orientation o = side == ManSide::UNSTABLE ? Orientation::U : Orientation::S;
    a.pieces.push_back(make_curve(o, {p.z - v * L, p.z, p.z + v * L}, slope_bound_for(k.coeff)));
    auto rep = validate_curve(a.pieces[0], k, 1e-9);
    if (!rep.valid) {
        a.valid = false;
        a.failing_pieces.push_back(0);
    }
    return a;
}

// bucketed segment set for intersection queries
struct SegGrid {
    double cell;
    std::vector<std::pair<Vec2, Vec2>> segs;
    std::unordered_map<std::int64_t, std::vector<std::uint32_t>> buckets;

    static std::int64_t key(std::int64_t i, std::int64_t j) { return (i << 32) ^ static_cast<std::uint32_t>(j); }

    SegGrid(std::vector<std::pair<Vec2, Vec2>> s, double c) : cell(c), segs(std::move(s)) {
        for (std::uint32_t n = 0; n < segs.size(); ++n) visit(segs[n].first, segs[n].second, [&](std::int64_t k) {
                buckets[k].push_back(n);
                return false;
            });
    }

    template <class F>
    bool visit(Vec2 a, Vec2 b, F f) const {
        auto i0 = static_cast<std::int64_t>(std::floor(std::min(a.x, b.x) / cell));
        auto i1 = static_cast<std::int64_t>(std::floor(std::max(a.x, b.x) / cell));
        auto j0 = static_cast<std::int64_t>(std::floor(std::min(a.y, b.y) / cell));
        auto j1 = static_cast<std::int64_t>(std::floor(std::max(a.y, b.y) / cell));
        for (auto i = i0; i <= i1; ++i)
            for (auto j = j0; j <= j1; ++j)
                if (f(key(i, j))) return true;
        return false;
    }

    std::optional<Vec2> hit(Vec2 a, Vec2 b) const {
        std::optional<Vec2> out;
        visit(a, b, [&](std::int64_t k) {
            auto it = buckets.find(k);
            if (it == buckets.end()) return false;
            for (auto n : it->second) {
                auto p = segment_intersection(a, b, segs[n].first, segs[n].second);
                if (p) {
                    out = p;
                    return true;
                }
            }
            return false;
        });
        return out;
    }
};

}  // namespace

LocalManifolds local_manifolds(const PiecewiseMap& m, const FixedPoint& p, const UniversalConePair& k) {
    if (!p.hyperbolic) throw condition_error("fixed point not a saddle: not Lozi-like");
    return {local_segment(m, p, p.v_s, ManSide::STABLE, k.stable),
            local_segment(m, p, p.v_u, ManSide::UNSTABLE, k.unstable)};
}

LocalManifolds local_manifolds(const PiecewiseMap& m, const FixedPointData& fp, const UniversalConePair& k) {
    return local_manifolds(m, fp.X, k);
}

ManifoldApprox grow_unstable(const PiecewiseMap& m, const ManifoldApprox& seed, int generations, double budget,
                             double chord_tol) {
    ManifoldApprox cur = seed;
    cur.length_budget = budget;
    double bound = slope_bound_for(seed.governing.coeff);
    for (int g = 0; g < generations && !cur.truncated; ++g) {
        ManifoldApprox next = cur;
        next.pieces.clear();
        next.failing_pieces.clear();
        double total = 0;
        for (const auto& piece : cur.pieces) {
            auto rep = curve_image(m, piece, seed.governing, chord_tol);
            for (std::size_t i = 0; i < rep.pieces.size(); ++i) {
                Polyline q = dedupe(rep.pieces[i].samples);
                if (q.size() < 2) continue;
                bool bad = std::find(rep.failing_pieces.begin(), rep.failing_pieces.end(), i) !=
                           rep.failing_pieces.end();
                double len = polyline_length(q);
                if (total + len > budget) {
                    // cut the piece at the remaining length
                    double rest = budget - total;
                    Polyline cut{q[0]};
                    for (std::size_t j = 1; j < q.size() && rest > 0; ++j) {
                        double d = norm(q[j] - q[j - 1]);
                        cut.push_back(d <= rest ? q[j] : lerp(q[j - 1], q[j], rest / d));
                        rest -= d;
                    }
                    if (cut.size() >= 2) next.pieces.push_back(make_curve(Orientation::U, cut, bound, true));
                    next.truncated = true;
                    break;
                }
                total += len;
                if (bad) {
                    next.valid = false;
                    next.failing_pieces.push_back(next.pieces.size());
                }
                next.pieces.push_back(make_curve(Orientation::U, q, bound, piece.truncated));
            }
            if (next.truncated) break;
        }
        next.generation = cur.generation + 1;
        cur = std::move(next);
    }
    return cur;
}

std::vector<MonotoneCurve> pull_back(const PiecewiseMap& m, Side s, const MonotoneCurve& c, double slope_bound,
                                     double chord_tol) {
    std::vector<MonotoneCurve> out;
    for (auto& p : pullback_polyline(m, s, c.samples, chord_tol)) {
        Polyline q = dedupe(p);
        if (q.size() >= 2) out.push_back(make_curve(Orientation::S, q, slope_bound, c.truncated));
    }
    return out;
}

ManifoldApprox grow_stable(const PiecewiseMap& m, const ManifoldApprox& seed, const Loop& region, int generations,
                           double budget, double chord_tol) {
    ManifoldApprox all = seed;
    all.pieces.clear();
    all.length_budget = budget;
    double bound = slope_bound_for(seed.governing.coeff);
    double total = 0;
    auto admit = [&](const Polyline& q, std::vector<MonotoneCurve>& gen) {
        Polyline d = dedupe(q);
        if (d.size() < 2) return true;
        double len = polyline_length(d);
        if (total + len > budget) {
            all.truncated = true;
            return false;
        }
        total += len;
        MonotoneCurve c = make_curve(Orientation::S, d, bound);
        if (!validate_curve(c, seed.governing, 1e-9).valid) {
            all.valid = false;
            all.failing_pieces.push_back(all.pieces.size());
        }
        all.pieces.push_back(c);
        gen.push_back(c);
        return true;
    };
    std::vector<MonotoneCurve> cur;
    for (const auto& p : seed.pieces)
        for (const auto& q : clip_polyline(p.samples, region))
            if (!admit(q, cur)) return all;
    for (int g = 0; g < generations; ++g) {
        std::vector<MonotoneCurve> next;
        for (const auto& c : cur)
            for (Side s : {Side::MINUS, Side::PLUS})
                for (const auto& pb : pull_back(m, s, c, bound, chord_tol))
                    for (const auto& q : clip_polyline(pb.samples, region))
                        if (!admit(q, next)) return all;
        all.generation = g + 1;
        if (next.empty()) break;
        cur = std::move(next);
    }
    return all;
}

ArcBoundReport arc_bound_check(const MonotoneCurve& c, double alpha_u, double diam_R, double tol) {
    ArcBoundReport r;
    r.length = c.length();
    r.bound = diam_R / alpha_u;
    r.pass = r.length <= r.bound * (1 + tol) + tol;
    return r;
}

DensityReport density_report(const ManifoldApprox& stable, const BBox& window, int grid_n,
                             const std::vector<Vec2>& occupied) {
    DensityReport r;
    double wx = (window.hi.x - window.lo.x) / grid_n, wy = (window.hi.y - window.lo.y) / grid_n;
    r.cell_diag = std::hypot(wx, wy);
    std::vector<char> use(static_cast<std::size_t>(grid_n) * grid_n, occupied.empty() ? 1 : 0);
    for (auto p : occupied) {
        int i = static_cast<int>(std::floor((p.x - window.lo.x) / wx));
        int j = static_cast<int>(std::floor((p.y - window.lo.y) / wy));
        if (i >= 0 && i < grid_n && j >= 0 && j < grid_n) use[static_cast<std::size_t>(i) * grid_n + j] = 1;
    }
    std::vector<std::pair<Vec2, Vec2>> segs;
    for (const auto& p : stable.pieces) {
        auto s = segments_of(p.samples, false);
        segs.insert(segs.end(), s.begin(), s.end());
    }
    double far = window.diam() + 1.0;
    SegmentIndex idx(std::move(segs), std::max(wx, wy));
    for (int i = 0; i < grid_n; ++i)
        for (int j = 0; j < grid_n; ++j) {
            if (!use[static_cast<std::size_t>(i) * grid_n + j]) continue;
            Vec2 c{window.lo.x + (i + 0.5) * wx, window.lo.y + (j + 0.5) * wy};
            double d = idx.size() ? idx.nearest(c, far) : far;
            ++r.cells;
            if (d > r.max_gap) {
                r.max_gap = d;
                r.worst = c;
            }
        }
    return r;
}

WitnessReport crossing_witness(const PiecewiseMap& m, const ManifoldApprox& stable, const MonotoneCurve& arc,
                               int max_generations, double length_cap) {
    WitnessReport r;
    std::vector<std::pair<Vec2, Vec2>> segs;
    BBox box;
    for (const auto& p : stable.pieces) {
        auto s = segments_of(p.samples, false);
        segs.insert(segs.end(), s.begin(), s.end());
        for (auto z : p.samples) box.add(z);
    }
    if (segs.empty()) {
        r.diagnostic = "empty stable approximation";
        return r;
    }
    SegGrid grid(std::move(segs), std::max(box.diam() / 256, 1e-9));
    std::vector<Polyline> cur{arc.samples};
    for (int g = 0; g <= max_generations; ++g) {
        double total = 0;
        for (const auto& p : cur) {
            total += polyline_length(p);
            for (std::size_t i = 0; i + 1 < p.size(); ++i) {
                if ((m.divider.side(p[i]) < 0) != (m.divider.side(p[i + 1]) < 0)) r.crossed_divider = true;
                if ((height_over_image(m, p[i]) < 0) != (height_over_image(m, p[i + 1]) < 0))
                    r.crossed_divider_image = true;
                auto w = grid.hit(p[i], p[i + 1]);
                if (!w) continue;
                Vec2 z = *w;
                for (int k = 0; k < g; ++k) {
                    auto q = inverse(m, z);
                    if (!q) {
                        r.diagnostic = "preimage undefined";
                        return r;
                    }
                    z = *q;
                }
                r.point = z;
                r.generations = g;
                return r;
            }
        }
        if (total > length_cap) {
            r.generations = g;
            r.diagnostic = "length cap reached without crossing";
            return r;
        }
        std::vector<Polyline> next;
        for (const auto& p : cur)
            for (auto& q : image_polyline(m, p)) next.push_back(dedupe(q));
        cur = std::move(next);
    }
    r.generations = max_generations;
    r.diagnostic = "generation budget exhausted";
    return r;
}

}  // namespace lozi
