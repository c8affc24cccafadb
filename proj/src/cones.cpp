#include "lozilab/cones.hpp"

#include <algorithm>
#include <random>

namespace lozi {

namespace {

Vec2 rotate(Vec2 v, double phi) {
    double c = std::cos(phi), s = std::sin(phi);
    return {v.x * c - v.y * s, v.x * s + v.y * c};
}

// boundary rays plus axis, or an n-direction fan
std::vector<Vec2> rays(const Cone& k, int fan) {
    if (k.coeff <= 0.0) return {k.axis};
    double th = std::acos(std::min(1.0, k.coeff));
    std::vector<Vec2> r;
    if (fan <= 3) return {rotate(k.axis, -th), k.axis, rotate(k.axis, th)};
    for (int i = 0; i < fan; ++i) r.push_back(rotate(k.axis, -th + 2 * th * i / (fan - 1)));
    return r;
}

bool rays_into(const Mat2& A, const std::vector<Vec2>& rs, const Cone& dst, double tol) {
    int nappe = 0;
    for (auto r : rs) {
        Vec2 w = A * r;
        if (norm(w) == 0.0) return false;
        if (!cone_contains(dst, w, tol)) return false;
        if (dst.coeff > 0) {
            int s = dot(w, dst.axis) > 0 ? 1 : -1;
            if (nappe != 0 && s != nappe) return false;
            nappe = s;
        }
    }
    return true;
}

double min_ratio(const Mat2& A, const std::vector<Vec2>& rs) {
    double best = INFINITY;
    for (auto r : rs) best = std::min(best, norm(A * r) / norm(r));
    return best;
}

bool feasible_u(const Mat2& A, double c) {
    if (c == 0.0) {
        Vec2 w = A * Vec2{1, 0};
        return w.y == 0.0 && w.x != 0.0;
    }
    int sx = 0;
    for (double s : {-c, c}) {
        Vec2 w = A * Vec2{1, s};
        if (w.x == 0.0) return false;
        int sg = w.x > 0 ? 1 : -1;
        if (sx != 0 && sg != sx) return false;
        sx = sg;
        if (std::abs(w.y) > c * std::abs(w.x)) return false;
    }
    return true;
}

bool feasible_s(const Mat2& B, double d) {
    if (d == 0.0) {
        Vec2 w = B * Vec2{0, 1};
        return w.x == 0.0 && w.y != 0.0;
    }
    int sy = 0;
    for (double t : {-d, d}) {
        Vec2 w = B * Vec2{t, 1};
        if (w.y == 0.0) return false;
        int sg = w.y > 0 ? 1 : -1;
        if (sy != 0 && sg != sy) return false;
        sy = sg;
        if (std::abs(w.x) > d * std::abs(w.y)) return false;
    }
    return true;
}

// feasible slope interval for a monotone-in-interval predicate, scanned on a log grid then bisected
template <class P>
std::optional<std::pair<double, double>> slope_interval(P feasible) {
    if (feasible(0.0)) {
        double hi = 0.0;
        for (int k = 0; k <= 4000; ++k) {
            double c = std::pow(10.0, -9.0 + 12.0 * k / 4000);
            if (!feasible(c)) break;
            hi = c;
        }
        return std::make_pair(0.0, hi);
    }
    const int N = 4000;
    int first = -1, last = -1;
    for (int k = 0; k <= N; ++k) {
        double c = std::pow(10.0, -9.0 + 12.0 * k / N);
        if (feasible(c)) {
            if (first < 0) first = k;
            last = k;
        } else if (first >= 0) {
            break;
        }
    }
    if (first < 0) return std::nullopt;
    auto grid = [&](int k) { return std::pow(10.0, -9.0 + 12.0 * k / N); };
    double lo = first > 0 ? grid(first - 1) : 0.0, hi = grid(first);
    for (int it = 0; it < 200 && hi - lo > 0; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (feasible(mid))
            hi = mid;
        else
            lo = mid;
    }
    double cmin = hi;
    lo = grid(last);
    hi = last < N ? grid(last + 1) : grid(last);
    for (int it = 0; it < 200 && hi - lo > 0; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (feasible(mid))
            lo = mid;
        else
            hi = mid;
    }
    return std::make_pair(cmin, lo);
}

}  // namespace

Cone slope_cone(Vec2 axis, double c) {
    if (c <= 0.0) return {axis, 0.0};
    return {axis, coeff_for_slope(c)};
}

ConeField constant_field(const Cone& c, FieldKind kind, const UniversalConePair& u) {
    ConeField f;
    f.assignment = [c](Vec2) { return c; };
    f.universal = u;
    f.kind = kind;
    f.constant = true;
    return f;
}

double min_expansion(const Mat2& A, const Cone& c) {
    if (c.coeff <= 0.0) return norm(A * c.axis);
    double th = std::acos(std::min(1.0, c.coeff));
    std::vector<Vec2> cand = {rotate(c.axis, -th), c.axis, rotate(c.axis, th)};
    // critical directions of |Aw|^2 are eigenvectors of A^T A
    Mat2 Q{A.a * A.a + A.c * A.c, A.a * A.b + A.c * A.d, A.a * A.b + A.c * A.d, A.b * A.b + A.d * A.d};
    Eigen2 e = eigen(Q);
    if (e.real)
        for (Vec2 v : {e.v_small, e.v_large, -e.v_small, -e.v_large})
            if (std::abs(dot(v, c.axis)) >= c.coeff * norm(v)) cand.push_back(v);
    return min_ratio(A, cand);
}

bool maps_cone_into(const Mat2& A, const Cone& src, const Cone& dst, double tol) {
    return rays_into(A, rays(src, 3), dst, tol);
}

HyperbolicityReport verify_invariance(const PiecewiseMap& m, const ConeField& cf_u, const ConeField& cf_s,
                                      std::size_t n_samples, const SampleRegion& region, std::uint64_t seed) {
    HyperbolicityReport r;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(region.lo.x, region.hi.x), uy(region.lo.y, region.hi.y);
    int fan = m.affine() ? 3 : 16;
    for (std::size_t k = 0; k < n_samples; ++k) {
        Vec2 z{ux(rng), uy(rng)};
        if (std::abs(m.divider.side(z)) < 1e-12) {
            ++r.skipped;
            continue;
        }
        ++r.samples;
        Mat2 J = m.jacobian(z);
        r.det_max = std::max(r.det_max, std::abs(J.det()));
        Cone ku = cf_u.at(z);
        if (ku.coeff <= 0.0) r.degenerate = true;
        bool ok = rays_into(J, rays(ku, fan), cf_u.at(m(z)), 1e-12);
        ok = ok && rays_into(Mat2{}, rays(ku, 3), cf_u.universal.unstable, 1e-12);
        auto zi = inverse(m, z);
        if (zi) {
            Mat2 Ji = m.jacobian(*zi);
            if (Ji.det() != 0.0) {
                Cone ks = cf_s.at(z);
                ok = ok && rays_into(Ji.inverse(), rays(ks, fan), cf_s.at(*zi), 1e-12);
                ok = ok && rays_into(Mat2{}, rays(ks, 3), cf_s.universal.stable, 1e-12);
            }
        }
        if (!ok && r.invariance_failures.size() < 100) r.invariance_failures.push_back(z);
    }
    r.pass = r.invariance_failures.empty();
    return r;
}

HyperbolicityReport verify_expansion(const PiecewiseMap& m, const ConeField& cf_u, const ConeField& cf_s,
                                     double lambda_target, std::size_t n_samples, const SampleRegion& region,
                                     std::uint64_t seed) {
    HyperbolicityReport r;
    r.lambda_target = lambda_target;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(region.lo.x, region.hi.x), uy(region.lo.y, region.hi.y);
    int fan = m.affine() ? 3 : 16;
    for (std::size_t k = 0; k < n_samples; ++k) {
        Vec2 z{ux(rng), uy(rng)};
        if (std::abs(m.divider.side(z)) < 1e-12) {
            ++r.skipped;
            continue;
        }
        ++r.samples;
        Mat2 J = m.jacobian(z);
        r.det_max = std::max(r.det_max, std::abs(J.det()));
        Cone ku = cf_u.at(z);
        if (ku.coeff <= 0.0) r.degenerate = true;
        r.lambda_estimate = std::min(r.lambda_estimate, min_ratio(J, rays(ku, fan)));
        auto zi = inverse(m, z);
        if (zi) {
            Mat2 Ji = m.jacobian(*zi);
            if (Ji.det() != 0.0)
                r.lambda_estimate = std::min(r.lambda_estimate, min_ratio(Ji.inverse(), rays(cf_s.at(z), fan)));
        }
    }
    r.pass = r.lambda_estimate >= lambda_target;
    return r;
}

std::optional<AffineCones> synthesize_affine_cones(const PiecewiseMap& m) {
    if (!m.affine()) return std::nullopt;
    const Mat2 A1 = m.minus.A, A2 = m.plus.A;
    auto iu = slope_interval([&](double c) { return feasible_u(A1, c) && feasible_u(A2, c); });
    if (!iu) return std::nullopt;
    AffineCones out;
    out.c_min = iu->first;
    out.c_max = iu->second;
    auto lam_u = [&](double c) {
        Cone k = slope_cone({1, 0}, c);
        return std::min(min_expansion(A1, k), min_expansion(A2, k));
    };
    // expansion is largest for the narrowest admissible cone; confirm on a grid
    out.c = out.c_min;
    out.lambda_u = lam_u(out.c_min);
    for (int k = 1; k <= 50; ++k) {
        double c = out.c_min + (out.c_max - out.c_min) * k / 50.0;
        double l = lam_u(c);
        if (l > out.lambda_u) {
            out.lambda_u = l;
            out.c = c;
        }
    }
    bool singular = A1.det() == 0.0 || A2.det() == 0.0;
    out.m0_like = singular || out.c_min == 0.0;
    Cone ku = slope_cone({1, 0}, out.c);
    Cone ks{{0, 1}, 0.0};
    if (!singular) {
        const Mat2 B1 = A1.inverse(), B2 = A2.inverse();
        auto is = slope_interval([&](double d) { return feasible_s(B1, d) && feasible_s(B2, d); });
        if (!is) return std::nullopt;
        out.d_min = is->first;
        out.d_max = is->second;
        out.d = out.d_min;
        ks = slope_cone({0, 1}, out.d);
        out.lambda_s = std::min(min_expansion(B1, ks), min_expansion(B2, ks));
    } else {
        out.lambda_s = INFINITY;
    }
    out.lambda = std::min(out.lambda_u, out.lambda_s);
    double au = ku.coeff, as = ks.coeff;
    UniversalConePair univ = make_universal(au, as);
    out.disjoint = univ.disjoint() || (au == 0.0 && as == 0.0);
    out.u = constant_field(ku, FieldKind::UNSTABLE, univ);
    out.s = constant_field(ks, FieldKind::STABLE, univ);
    return out;
}

VolumeReport check_volume_contraction(const PiecewiseMap& m, std::size_t n_samples, const SampleRegion& region,
                                      std::uint64_t seed) {
    VolumeReport r;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(region.lo.x, region.hi.x), uy(region.lo.y, region.hi.y);
    for (std::size_t k = 0; k < n_samples; ++k) {
        Vec2 z{ux(rng), uy(rng)};
        r.det_max = std::max(r.det_max, std::abs(m.jacobian(z).det()));
        ++r.samples;
    }
    r.pass = r.det_max < 1.0;
    return r;
}

}  // namespace lozi
