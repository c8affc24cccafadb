#include "lozilab/renorm.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <sstream>

namespace lozi {

namespace {

void require_affine(const PiecewiseMap& m) {
    if (!m.affine() || !m.divider.linear) throw condition_error("renormalization needs affine branches and a line divider");
}

SLine divider_line(const PiecewiseMap& m) { return {m.divider.x0, m.divider.k}; }

Loop iterate_loop(const PiecewiseMap& m, Loop l, int n) {
    for (int k = 0; k < n; ++k) l = image_loop(m, l);
    return l;
}

Polyline join(const std::vector<Polyline>& pieces) {
    Polyline out;
    for (const auto& p : pieces)
        for (auto z : p)
            if (out.empty() || norm(out.back() - z) > 1e-15) out.push_back(z);
    return out;
}

Polyline iterate_polyline(const PiecewiseMap& m, Polyline p, int n) {
    for (int k = 0; k < n; ++k) p = join(image_polyline(m, p));
    return p;
}

// face polyline between two abscissae, kinked at x = 0
Polyline face_segment(double y0, double k, double xa, double xb) {
    auto y = [&](double x) { return y0 + k * std::min(x, 0.0); };
    Polyline out{{xa, y(xa)}};
    if ((xa < 0 && xb > 0) || (xa > 0 && xb < 0)) out.push_back({0, y0});
    out.push_back({xb, y(xb)});
    return out;
}

// y-intervals where the line meets the closed loop region; touching points give degenerate intervals
std::vector<std::pair<double, double>> line_loop_intervals(const SLine& l, const Loop& loop, bool touches = true) {
    std::vector<double> ys, on;
    auto tol = [](Vec2 z) { return 1e-12 * (1 + norm(z)); };
    for (std::size_t i = 0; i < loop.size(); ++i) {
        Vec2 a = loop[i], b = loop[(i + 1) % loop.size()];
        double sa = l.side(a), sb = l.side(b);
        if (std::abs(sa) <= tol(a)) {
            ys.push_back(a.y);
            on.push_back(a.y);
            continue;
        }
        if (std::abs(sb) > tol(b) && (sa < 0) != (sb < 0)) {
            double t = sa / (sa - sb);
            ys.push_back(a.y + t * (b.y - a.y));
        }
    }
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i + 1 < ys.size(); ++i) {
        double mid = 0.5 * (ys[i] + ys[i + 1]);
        if (!point_in_loop(loop, {l.x_at(mid), mid}, 1e-12)) continue;
        if (!out.empty() && out.back().second == ys[i])
            out.back().second = ys[i + 1];
        else
            out.push_back({ys[i], ys[i + 1]});
    }
    if (touches)
        for (double y : on) {
            bool covered = false;
            for (auto [lo, hi] : out)
                if (y >= lo && y <= hi) covered = true;
            if (!covered) out.push_back({y, y});
        }
    std::sort(out.begin(), out.end());
    return out;
}

Vec2 line_meet(const SLine& l, Vec2 z, Vec2 v) {
    double den = v.x - l.q * v.y;
    if (den == 0.0) throw condition_error("parallel lines");
    double t = (l.p + l.q * z.y - z.x) / den;
    return z + v * t;
}

MonotoneCurve clip_to_faces(const SLine& l, const FaceParams& f, const std::string& name, const SLine& left,
                            const SLine& right) {
    Vec2 lo = meet_face(l, f.y0_lower, f.k_lower), hi = meet_face(l, f.y0_upper, f.k_upper);
    const double tol = 1e-9;
    for (auto z : {lo, hi})
        if (!std::isfinite(z.x) || left.side(z) < -tol || right.side(z) > tol)
            throw condition_error(name + " does not span R between its faces");
    return make_curve(Orientation::S, {lo, hi}, 0.0);
}

bool inside(const Loop& l, Vec2 z) { return winding_number(l, z) != 0; }

double loop_height_max(const PiecewiseMap& m, const Loop& l) {
    double h = 0;
    for (auto z : l) h = std::max(h, std::abs(height_over_image(m, z)));
    return h;
}

int sgn(double v) { return (v > 0) - (v < 0); }

PolySet strip_between(const SLine& a, const SLine& b) {
    const double Y = 2.0;
    Loop q{{a.x_at(-Y), -Y}, {b.x_at(-Y), -Y}, {b.x_at(Y), Y}, {a.x_at(Y), Y}};
    if (signed_area(q) < 0) std::reverse(q.begin(), q.end());
    return polyset(q);
}

// Pi_+ Pi_-^(n-2) of the divider
SLine split_line(const PiecewiseMap& m, int n) {
    SLine s = divider_line(m);
    for (int k = 0; k < n - 2; ++k) s = pull(m, Side::MINUS, s);
    return pull(m, Side::PLUS, s);
}

}  // namespace

SLine sline_through(Vec2 pt, Vec2 dir) {
    if (dir.y == 0.0) throw condition_error("horizontal direction is not an s-line");
    double q = dir.x / dir.y;
    return {pt.x - q * pt.y, q};
}

SLine pull(const PiecewiseMap& m, Side s, const SLine& l) {
    require_affine(m);
    const Branch& br = m.branch(s);
    const Mat2& A = br.A;
    double c1 = A.a - l.q * A.c, c2 = A.b - l.q * A.d;
    double d = br.t.x - l.q * br.t.y - l.p;
    if (c1 == 0.0) throw condition_error("pull-back is not an s-line");
    return {-d / c1, -c2 / c1};
}

Vec2 meet_face(const SLine& l, double y0, double k) {
    double x = l.x_at(y0);
    if (x >= 0) return {x, y0};
    double y = (y0 + k * l.p) / (1 - k * l.q);
    return {l.x_at(y), y};
}

RenormRect make_renorm_rect(const PiecewiseMap& m, const FaceParams& fp) {
    require_affine(m);
    RenormRect rr;
    rr.faces = fp;
    auto fx = fixed_points(m);
    rr.left = sline_through(fx.Y.z, fx.Y.v_s);
    rr.right = pull(m, Side::PLUS, rr.left);
    Vec2 ll = meet_face(rr.left, fp.y0_lower, fp.k_lower), lr = meet_face(rr.right, fp.y0_lower, fp.k_lower);
    Vec2 ul = meet_face(rr.left, fp.y0_upper, fp.k_upper), ur = meet_face(rr.right, fp.y0_upper, fp.k_upper);
    rr.R.lower = make_curve(Orientation::U, face_segment(fp.y0_lower, fp.k_lower, ll.x, lr.x), 0.0);
    rr.R.upper = make_curve(Orientation::U, face_segment(fp.y0_upper, fp.k_upper, ul.x, ur.x), 0.0);
    rr.R.left = make_curve(Orientation::S, {ll, ul}, 0.0);
    rr.R.right = make_curve(Orientation::S, {lr, ur}, 0.0);
    rr.loop = rr.R.loop();
    return rr;
}

namespace {

// margins of f(R) inside R: faces and right side (positive inside), and the left side
std::pair<double, double> image_margins(const PiecewiseMap& m, const RenormRect& rr, int refine) {
    Loop fine;
    const Loop& l = rr.loop;
    for (std::size_t i = 0; i < l.size(); ++i)
        for (int k = 0; k < refine; ++k) fine.push_back(lerp(l[i], l[(i + 1) % l.size()], double(k) / refine));
    Loop img = image_loop(m, fine);
    const FaceParams& f = rr.faces;
    double mf = INFINITY, ml = INFINITY;
    for (auto z : img) {
        double lo = f.y0_lower + f.k_lower * std::min(z.x, 0.0);
        double hi = f.y0_upper + f.k_upper * std::min(z.x, 0.0);
        mf = std::min({mf, z.y - lo, hi - z.y, -rr.right.side(z)});
        ml = std::min(ml, rr.left.side(z));
    }
    return {mf, ml};
}

}  // namespace

std::optional<RenormRect> find_rectangle(const PiecewiseMap& m, double c_min) {
    require_affine(m);
    std::optional<RenormRect> best;
    double bm = -INFINITY;
    const int NY = 30, NK = 5;
    for (int a = 0; a < NY; ++a)
        for (int b = 0; b < NK; ++b)
            for (int c = 0; c < NY; ++c)
                for (int d = 0; d < NK; ++d) {
                    FaceParams fp;
                    fp.y0_lower = -0.3 + 0.29 * a / (NY - 1);
                    fp.k_lower = c_min * b / (NK - 1);
                    fp.y0_upper = 0.01 + 0.29 * c / (NY - 1);
                    fp.k_upper = -c_min + c_min * d / (NK - 1);
                    RenormRect rr;
                    try {
                        rr = make_renorm_rect(m, fp);
                    } catch (const condition_error&) {
                        continue;
                    }
                    auto [mf, ml] = image_margins(m, rr, 8);
                    if (ml < -1e-9) continue;
                    if (mf > bm) {
                        bm = mf;
                        best = rr;
                    }
                }
    return best;
}

RConditionReport check_R_conditions(const PiecewiseMap& m, const RenormRect& rr) {
    RConditionReport r;
    std::ostringstream why;
    auto [mf, ml] = image_margins(m, rr, 16);
    r.R1_margin = mf;
    r.R1 = mf >= -1e-12 && ml >= -1e-12;
    if (!r.R1) why << "f(R) leaves R (margin " << mf << ", left " << ml << "); ";
    const auto& R = rr.R;
    r.R2_left = std::all_of(R.left.samples.begin(), R.left.samples.end(), [&](Vec2 z) { return m.divider.side(z) < 0; });
    r.R2_right =
        std::all_of(R.right.samples.begin(), R.right.samples.end(), [&](Vec2 z) { return m.divider.side(z) > 0; });
    r.R2_lower = std::all_of(R.lower.samples.begin(), R.lower.samples.end(),
                             [&](Vec2 z) { return height_over_image(m, z) < 0; });
    r.R2_upper_literal = std::all_of(R.upper.samples.begin(), R.upper.samples.end(),
                                     [&](Vec2 z) { return height_over_image(m, z) < 0; });
    r.R2_upper_alt = std::all_of(R.upper.samples.begin(), R.upper.samples.end(),
                                 [&](Vec2 z) { return height_over_image(m, z) > 0; });
    {
        Vec2 lo = R.left.samples.front(), hi = R.left.samples.back();
        r.R2_left_invariant = true;
        for (auto z : {lo, hi}) {
            Vec2 w = m(z);
            if (std::abs(rr.left.side(w)) > 1e-12 * (1 + norm(w)) || w.y < lo.y - 1e-12 || w.y > hi.y + 1e-12)
                r.R2_left_invariant = false;
        }
    }
    if (!r.R2_left || !r.R2_right || !r.R2_lower || !r.R2_upper_alt || !r.R2_left_invariant) why << "R2 face positions; ";
    auto fx = fixed_points(m);
    SLine b1 = sline_through(fx.X.z, fx.X.v_s);
    try {
        auto c = clip_to_faces(b1, rr.faces, "beta_1", rr.left, rr.right);
        r.R3 = m.divider.side(fx.X.z) > 0 && m.divider.side(c.samples.front()) > 0 &&
               m.divider.side(c.samples.back()) > 0;
    } catch (const condition_error& e) {
        why << e.what() << "; ";
    }
    if (!r.R3) why << "R3; ";
    Loop img = image_loop(m, rr.loop);
    auto iv = line_loop_intervals(b1, img, false);
    r.R4_intervals = static_cast<int>(iv.size());
    if (iv.size() == 2) {
        auto mid = [&](std::pair<double, double> s) {
            double y = 0.5 * (s.first + s.second);
            return height_over_image(m, {b1.x_at(y), y});
        };
        double h0 = mid(iv[0]), h1 = mid(iv[1]);
        r.R4 = (h0 < 0 && h1 > 0) || (h0 > 0 && h1 < 0);
    }
    if (!r.R4) why << "R4 (" << iv.size() << " intervals); ";
    r.pass = r.R1 && r.R2_left && r.R2_right && r.R2_lower && r.R2_upper_alt && r.R2_left_invariant && r.R3 && r.R4;
    r.detail = why.str();
    return r;
}

void build_lines(const PiecewiseMap& m, int m_max, std::vector<SLine>& beta, std::vector<SLine>& gamma) {
    require_affine(m);
    auto fx = fixed_points(m);
    beta.assign(1, sline_through(fx.X.z, fx.X.v_s));
    for (int k = 2; k <= m_max; ++k) beta.push_back(pull(m, Side::MINUS, beta.back()));
    gamma.clear();
    for (const auto& b : beta) gamma.push_back(pull(m, Side::PLUS, b));
}

RenormPartition build_partition(const PiecewiseMap& m, const RenormRect& rr, int m_max) {
    RenormPartition part;
    part.rect = rr;
    part.depth = m_max;
    part.epsilon = orientation_sign(m);
    build_lines(m, m_max, part.beta_lines, part.gamma_lines);
    for (int k = 0; k < m_max; ++k) {
        part.beta.push_back(
            clip_to_faces(part.beta_lines[k], rr.faces, "beta_" + std::to_string(k + 1), rr.left, rr.right));
        part.gamma.push_back(
            clip_to_faces(part.gamma_lines[k], rr.faces, "gamma_" + std::to_string(k + 1), rr.left, rr.right));
    }
    part.beta.push_back(rr.R.left);
    part.gamma.push_back(rr.R.right);
    const Rectangle& R = rr.R;
    if (m_max >= 2) part.B = make_s_strip(R, part.beta[1], part.beta[0]);
    part.C = make_s_strip(R, part.gamma[0], R.right);
    part.D = make_s_strip(R, R.left, R.right);
    for (int n = 2; n <= m_max; ++n) part.C_parts.push_back(make_s_strip(R, part.gamma[n - 2], part.gamma[n - 1]));
    return part;
}

ReturnMapData first_return(const PiecewiseMap& m, const RenormPartition& part, int n_max,
                           std::size_t samples_per_strip, std::uint64_t seed) {
    ReturnMapData rd;
    rd.pass = true;
    std::mt19937_64 rng(seed);
    const FaceParams& fp = part.rect.faces;
    const Loop& Cloop = part.C.loop;
    n_max = std::min(n_max, part.depth);
    for (int n = 2; n <= n_max; ++n) {
        ReturnStrip s;
        s.n = n;
        const Strip& cn = part.C_n(n);
        s.C = cn.loop;
        s.U = iterate_loop(m, s.C, n);
        s.S = clip_to_faces(split_line(m, n), fp, "S_" + std::to_string(n), part.rect.left, part.rect.right);
        s.C_left = make_s_strip(part.rect.R, cn.a, s.S).loop;
        s.C_right = make_s_strip(part.rect.R, s.S, cn.b).loop;
        s.U_left = iterate_loop(m, s.C_left, n);
        s.U_right = iterate_loop(m, s.C_right, n);
        s.T = iterate_polyline(m, s.S.samples, n);
        for (auto z : s.T) s.T_height = std::max(s.T_height, std::abs(height_over_image(m, z)));
        auto all_sign = [&](const Loop& l, int sg) {
            return std::all_of(l.begin(), l.end(), [&](Vec2 z) { return sg * height_over_image(m, z) >= -1e-9; });
        };
        s.halves_split = (all_sign(s.U_left, -1) && all_sign(s.U_right, 1)) ||
                         (all_sign(s.U_left, 1) && all_sign(s.U_right, -1));
        s.bnd_l = iterate_polyline(
            m, face_segment(fp.y0_lower, fp.k_lower, cn.a.samples.front().x, cn.b.samples.front().x), n);
        s.bnd_r = iterate_polyline(
            m, face_segment(fp.y0_upper, fp.k_upper, cn.a.samples.back().x, cn.b.samples.back().x), n);
        BBox bb = bbox_of(s.C);
        std::uniform_real_distribution<double> ux(bb.lo.x, bb.hi.x), uy(bb.lo.y, bb.hi.y);
        const int kmax = n_max + 50;
        for (std::size_t tries = 0; s.samples < samples_per_strip && tries < 500 * samples_per_strip; ++tries) {
            Vec2 z{ux(rng), uy(rng)};
            if (!inside(s.C, z)) continue;
            ++s.samples;
            int k = 1;
            Vec2 w = m(z);
            while (k <= kmax && !inside(Cloop, w)) {
                w = m(w);
                ++k;
            }
            if (k > kmax)
                ++s.escaped;
            else if (k == n)
                ++s.return_ok;
        }
        s.certificate = s.samples == samples_per_strip && s.return_ok == s.samples;
        if (!s.certificate || s.T_height > 1e-9 || !s.halves_split) rd.pass = false;
        rd.strips.push_back(std::move(s));
    }
    return rd;
}

OrderingReport verify_ordering(const ReturnMapData& rd, double lambda, int epsilon, int n_max) {
    OrderingReport r;
    r.n_max = n_max;
    auto val = [&](int n) { return -std::pow(epsilon / lambda, n - 1); };
    std::vector<const ReturnStrip*> us;
    for (const auto& s : rd.strips)
        if (s.n <= n_max) us.push_back(&s);
    for (const auto* s : us) {
        int rank = 0;
        for (const auto* t : us)
            if (val(t->n) < val(s->n)) ++rank;
        r.expected_rank.push_back(rank);
    }
    for (std::size_t i = 0; i < us.size(); ++i)
        for (std::size_t j = i + 1; j < us.size(); ++j) {
            ++r.pairs;
            Order want = val(us[i]->n) < val(us[j]->n) ? Order::LEFT : Order::RIGHT;
            Order got = order_u(us[i]->U, us[j]->U, true, true);
            if (got != want) {
                std::ostringstream os;
                os << "U_" << us[i]->n << " vs U_" << us[j]->n << ": expected " << to_string(want) << ", observed "
                   << to_string(got);
                r.mismatches.push_back(os.str());
            }
        }
    r.order_pass = r.mismatches.empty() && r.pairs > 0;
    r.flip_stated_pass = r.flip_corrected_pass = !us.empty();
    for (const auto* s : us) {
        Order got = order_u(s->bnd_l, s->bnd_r, false, false);
        int n = s->n;
        int e1 = (n - 1) % 2 == 0 ? 1 : epsilon;
        int en = n % 2 == 0 ? 1 : epsilon;
        // stated: sign -eps^(n-1) applied to dU^r <| dU^l
        Order stated = -e1 > 0 ? Order::RIGHT : Order::LEFT;
        Order corrected = en > 0 ? Order::LEFT : Order::RIGHT;
        if (got != stated) r.flip_stated_pass = false;
        if (got != corrected) r.flip_corrected_pass = false;
        r.flip_observed.push_back("n=" + std::to_string(n) + " dU^l " + to_string(got) + " dU^r");
    }
    return r;
}

ThetaTable verify_theta(const PiecewiseMap& m, const RenormPartition& part, int i_max, int m_max, double lambda) {
    ThetaTable t;
    i_max = std::min(i_max, part.depth);
    m_max = std::min(m_max, part.depth);
    t.i_max = i_max;
    t.m_max = m_max;
    const int eps = part.epsilon;
    auto fx = fixed_points(m);
    Vec2 Y = fx.Y.z, vu = fx.Y.v_u;
    std::vector<Loop> K;
    for (int mm = 2; mm <= m_max; ++mm) {
        Loop base = make_s_strip(part.rect.R, part.gamma[mm - 2], part.rect.R.right).loop;
        K.push_back(iterate_loop(m, base, mm - 1));
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    t.theta.assign(i_max, std::vector<double>(std::max(0, m_max - 1), nan));
    for (int i = 1; i <= i_max; ++i) {
        const SLine& b = part.beta_lines[i - 1];
        Vec2 P = line_meet(b, Y, vu);
        double scale = std::sqrt(1 + b.q * b.q);
        for (int mm = 2; mm <= m_max; ++mm) {
            auto iv = line_loop_intervals(b, K[mm - 2]);
            if (iv.empty()) continue;
            double best = INFINITY, val = nan;
            for (auto [lo, hi] : iv) {
                if (P.y >= lo && P.y <= hi) {
                    best = 0;
                    val = 0;
                    break;
                }
                for (double y : {lo, hi}) {
                    double d = std::abs(y - P.y);
                    if (d < best) {
                        best = d;
                        val = (y > P.y ? 1 : -1) * d * scale;
                    }
                }
            }
            t.theta[i - 1][mm - 2] = val;
        }
    }
    auto th = [&](int i, int mm) { return t.theta[i - 1][mm - 2]; };
    for (int i = 1; i <= i_max; ++i)
        for (int mm = 2; mm <= m_max; ++mm) {
            double v = th(i, mm);
            if (i == 1) {
                ++t.first_row_checks;
                int want = (mm - 2) % 2 == 0 ? 1 : eps;
                if (std::isnan(v) || sgn(v) != want) ++t.first_row_failures;
            }
            if (mm >= 3 && i + 1 <= i_max) {
                double w = th(i + 1, mm - 1);
                ++t.sign_checks;
                ++t.contraction_checks;
                if (std::isnan(v) || std::isnan(w) || sgn(v) != eps * sgn(w) || sgn(v) == 0) ++t.sign_failures;
                if (std::isnan(v) || std::isnan(w)) {
                    ++t.contraction_failures;
                    continue;
                }
                double ratio = std::abs(v) / (std::abs(w) / lambda);
                t.worst_ratio = std::max(t.worst_ratio, ratio);
                if (std::abs(v) > std::abs(w) / lambda * (1 + 1e-6)) ++t.contraction_failures;
            }
            if (mm >= 3) {
                double w = th(i, mm - 1);
                ++t.closer_checks;
                if (std::isnan(v) || std::isnan(w) || !(std::abs(v) < std::abs(w))) ++t.closer_failures;
            }
        }
    t.pass = t.sign_failures == 0 && t.first_row_failures == 0 && t.contraction_failures == 0 &&
             t.closer_failures == 0 && t.sign_checks > 0;
    return t;
}

Vec2 first_turn(const PiecewiseMap& m) {
    auto fx = fixed_points(m);
    Vec2 P = line_meet(divider_line(m), fx.Y.z, fx.Y.v_u);
    return m(P);
}

TriangleModel build_triangle(const PiecewiseMap& m, const std::vector<SLine>& gamma, int tower_cap) {
    require_affine(m);
    if (orientation_sign(m) != 1) throw condition_error("triangle model needs an orientation preserving map");
    if (gamma.size() < 2) throw condition_error("triangle model needs at least two gamma curves");
    TriangleModel tm;
    auto fx = fixed_points(m);
    tm.A = first_turn(m);
    tm.D = line_meet(gamma[0], fx.Y.z, fx.Y.v_u);
    tm.E = m(tm.D);
    tm.H0 = {tm.D, tm.A, tm.E};
    if (signed_area(tm.H0) < 0) std::reverse(tm.H0.begin(), tm.H0.end());
    PolySet H = polyset(tm.H0);
    double a0 = area(H);
    int cap = std::min<int>(tower_cap, static_cast<int>(gamma.size()));
    for (int i = 2; i <= cap; ++i) {
        PolySet c = poly_intersection(strip_between(gamma[i - 2], gamma[i - 1]), H);
        if (area(c) <= 1e-14 * a0) {
            if (tm.p > 0) break;
            tm.C_hat.push_back({});
            continue;
        }
        tm.C_hat.push_back(c);
        tm.p = i;
    }
    tm.C_hat.resize(std::max(0, tm.p - 1));
    if (tm.p == 0) throw condition_error("no strip meets the triangle");
    for (int i = 2; i <= tm.p; ++i) {
        PolySet img;
        for (const auto& poly : tm.C_hat[i - 2]) {
            Loop z = poly.outer;
            for (int j = 1; j <= i; ++j) {
                z = image_loop(m, z);
                if (j < i) tm.towers.push_back(z);
            }
            if (signed_area(z) < 0) std::reverse(z.begin(), z.end());
            auto u = poly_intersection(polyset(z), H);
            img.insert(img.end(), u.begin(), u.end());
        }
        tm.U_hat.push_back(img);
        if (tm.p_least_U == 0 && area(img) > 1e-14 * a0) tm.p_least_U = i;
    }
    tm.towers_closed = true;
    tm.tower_height = loop_height_max(m, tm.H0);
    for (const auto& t : tm.towers) tm.tower_height = std::max(tm.tower_height, loop_height_max(m, t));
    compute_pq(tm, {});
    return tm;
}

void compute_pq(TriangleModel& tm, const std::vector<Vec2>& attractor_points) {
    tm.q = 0;
    for (int i = 2; i <= tm.p && tm.q == 0; ++i) {
        const PolySet& u = tm.U_hat[i - 2];
        if (u.empty()) continue;
        if (attractor_points.empty()) {
            tm.q = i;
            break;
        }
        for (auto z : attractor_points)
            if (contains(u, z)) {
                tm.q = i;
                break;
            }
    }
    if (tm.q > tm.p) tm.q = tm.p;
}

std::string to_string(Tangency t) {
    switch (t) {
        case Tangency::T1: return "T1";
        case Tangency::T2: return "T2";
        default: return "NEITHER";
    }
}

namespace {

// first return to H0 under f, none within the cap
std::optional<std::pair<Vec2, int>> first_return_H0(const PiecewiseMap& m, const Loop& H0, Vec2 z, int cap) {
    for (int k = 1; k <= cap; ++k) {
        z = m(z);
        if (point_in_loop(H0, z, 1e-12)) return std::make_pair(z, k);
    }
    return std::nullopt;
}

// samples of loop ∩ divider image
std::vector<Vec2> divider_image_samples(const PiecewiseMap& m, const Loop& l) {
    std::vector<Vec2> hits;
    for (std::size_t i = 0; i < l.size(); ++i) {
        Vec2 a = l[i], b = l[(i + 1) % l.size()];
        double ha = height_over_image(m, a), hb = height_over_image(m, b);
        if ((ha < 0) != (hb < 0)) hits.push_back(lerp(a, b, ha / (ha - hb)));
    }
    std::sort(hits.begin(), hits.end(), [](Vec2 a, Vec2 b) { return a.x < b.x; });
    std::vector<Vec2> out;
    for (std::size_t i = 0; i + 1 < hits.size(); i += 2)
        for (int k = 1; k < 20; ++k) out.push_back(lerp(hits[i], hits[i + 1], k / 20.0));
    return out;
}

}  // namespace

TangencyReport classify_tangency(const PiecewiseMap& m, const TriangleModel& tm, const std::vector<SLine>& gamma) {
    TangencyReport r;
    r.index = tm.p;
    if (tm.p < 2) {
        r.detail = "no return strips";
        return r;
    }
    SLine S = split_line(m, tm.p);
    const PolySet& Cp = tm.C_hat[tm.p - 2];
    std::vector<Vec2> pts;
    for (int i = 2; i <= tm.p; ++i)
        for (const auto& poly : tm.U_hat[i - 2]) {
            auto s = divider_image_samples(m, poly.outer);
            pts.insert(pts.end(), s.begin(), s.end());
        }
    bool all_r = !pts.empty(), all_l = !pts.empty();
    for (auto z : pts) {
        bool inCp = contains(Cp, z, 1e-12);
        bool inPrev = tm.p > 2 && contains(tm.C_hat[tm.p - 3], z, 1e-12);
        if (!(inCp && S.side(z) >= -1e-12)) all_r = false;
        if (!((inCp && S.side(z) <= 1e-12) || inPrev)) all_l = false;
    }
    if (tm.q == tm.p && all_r)
        r.verdict = Tangency::T1;
    else if (tm.q == tm.p && all_l)
        r.verdict = Tangency::T2;
    std::size_t ok = 0, total = 0;
    for (auto z : divider_image_samples(m, tm.H0)) {
        ++total;
        auto w = first_return_H0(m, tm.H0, z, 64);
        if (w && contains(tm.C_hat[0], w->first, 1e-12)) ++ok;
    }
    r.return_of_divider_in_C2 = total > 0 && ok == total;
    std::ostringstream os;
    os << "p=" << tm.p << " q=" << tm.q << " image samples " << pts.size() << " divider returns " << ok << "/" << total;
    r.detail = os.str();
    (void)gamma;
    return r;
}

PReport verify_P(const PiecewiseMap& m, const TriangleModel& tm, const std::vector<SLine>& gamma) {
    PReport r;
    if (tm.p < 2 || tm.C_hat.empty()) {
        r.witnesses.push_back("no return strips");
        return r;
    }
    const int p = tm.p;
    SLine S = split_line(m, p);
    const PolySet& Cp = tm.C_hat[p - 2];
    Loop outer = Cp.front().outer;
    // P1: the split curve returns onto the divider image
    double h1 = 0;
    bool any = false;
    for (const auto& seg : clip_polyline({{S.x_at(-2), -2}, {S.x_at(2), 2}}, outer))
        for (auto z : iterate_polyline(m, seg, p)) {
            h1 = std::max(h1, std::abs(height_over_image(m, z)));
            any = true;
        }
    r.P1 = any && h1 < 1e-9;
    if (!r.P1) r.witnesses.push_back("P1: split curve image height " + std::to_string(h1));
    // P2: halves land on opposite sides of the divider image
    PolySet half_l = poly_intersection(Cp, polyset(Loop{{S.x_at(-2) - 10, -2}, {S.x_at(-2), -2}, {S.x_at(2), 2},
                                                         {S.x_at(2) - 10, 2}}));
    PolySet half_r = poly_intersection(Cp, polyset(Loop{{S.x_at(-2), -2}, {S.x_at(-2) + 10, -2}, {S.x_at(2) + 10, 2},
                                                         {S.x_at(2), 2}}));
    auto side_of = [&](const PolySet& ps) {
        int sg = 0;
        for (const auto& poly : ps)
            for (auto z : iterate_loop(m, poly.outer, p)) {
                double h = height_over_image(m, z);
                if (std::abs(h) < 1e-9) continue;
                int s = h > 0 ? 1 : -1;
                if (sg != 0 && s != sg) return 0;
                sg = s;
            }
        return sg;
    };
    int sl = side_of(half_l), sr = side_of(half_r);
    r.P2 = sl != 0 && sr != 0 && sl != sr;
    if (!r.P2) r.witnesses.push_back("P2: half sides " + std::to_string(sl) + "," + std::to_string(sr));
    // P3: the left face returns into W^s(X)
    double d3 = 0;
    any = false;
    for (auto z : outer)
        if (std::abs(gamma[p - 2].side(z)) < 1e-9) {
            Vec2 w = z;
            for (int k = 0; k < p; ++k) w = m(w);
            d3 = std::max(d3, std::abs(gamma[0].side(w)));
            any = true;
        }
    r.P3 = any && d3 < 1e-9;
    if (!r.P3) r.witnesses.push_back("P3: left face image offset " + std::to_string(d3));
    // P4: the first turn returns into C_2 and the image joins C_p with C_2
    auto w = first_return_H0(m, tm.H0, tm.A, 64);
    Loop img = iterate_loop(m, outer, p);
    if (signed_area(img) < 0) std::reverse(img.begin(), img.end());
    PolySet pimg = polyset(img);
    bool meets2 = area(poly_intersection(pimg, tm.C_hat[0])) > 0;
    bool meetsp = area(poly_intersection(pimg, Cp)) > 0;
    r.P4 = w && contains(tm.C_hat[0], w->first, 1e-12) && meets2 && meetsp;
    if (!r.P4) r.witnesses.push_back("P4: return of A or connection failed");
    r.orientation = sgn(signed_area(iterate_loop(m, outer, p))) == sgn(signed_area(outer));
    if (!r.orientation) r.witnesses.push_back("orientation of the return image reversed");
    return r;
}

double gamma_offset(const PiecewiseMap& m, int i) {
    std::vector<SLine> beta, gamma;
    build_lines(m, i, beta, gamma);
    Vec2 A = first_turn(m);
    return A.x - gamma[i - 1].x_at(A.y);
}

std::vector<TangencyRoot> tangency_curve(const ParamFamily& fam, const Params& base, const std::string& param,
                                         double lo, double hi, int i, int grid, double tol) {
    auto off = [&](double mu) {
        Params p = base;
        p[param] = mu;
        try {
            return gamma_offset(normalized(fam.instantiate(p)), i);
        } catch (const condition_error&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    };
    std::vector<TangencyRoot> out;
    double x0 = lo, f0 = off(lo);
    for (int k = 1; k <= grid; ++k) {
        double x1 = lo + (hi - lo) * k / grid, f1 = off(x1);
        if (!std::isnan(f0) && !std::isnan(f1) && (f0 < 0) != (f1 < 0)) {
            double a = x0, b = x1, fa = f0;
            while (b - a > tol) {
                double c = 0.5 * (a + b), fc = off(c);
                if (std::isnan(fc)) break;
                if ((fc < 0) == (fa < 0)) {
                    a = c;
                    fa = fc;
                } else {
                    b = c;
                }
            }
            double mu = 0.5 * (a + b);
            out.push_back({mu, off(mu)});
        }
        x0 = x1;
        f0 = f1;
    }
    return out;
}

}  // namespace lozi
