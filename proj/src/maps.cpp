#include "lozilab/maps.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace lozi {

namespace {

constexpr double kDividerTol = 1e-12;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

bool finite(Vec2 z) { return std::isfinite(z.x) && std::isfinite(z.y); }

int sgn(double v, double tol) { return v > tol ? 1 : (v < -tol ? -1 : 0); }

Vec2 crossing_point(const PiecewiseMap& m, Vec2 a, Vec2 b) {
    double sa = m.divider.side(a), sb = m.divider.side(b);
    if (m.divider.linear) {
        double t = sa / (sa - sb);
        Vec2 c = lerp(a, b, t);
        c.x = m.divider.phi(c.y);
        return c;
    }
    double lo = 0, hi = 1;
    for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (lo + hi);
        double sm = m.divider.side(lerp(a, b, mid));
        if ((sm < 0) == (sa < 0))
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-15) break;
    }
    Vec2 c = lerp(a, b, 0.5 * (lo + hi));
    c.x = m.divider.phi(c.y);
    return c;
}

void refine_into(const Branch& br, Vec2 p, Vec2 q, Vec2 fp, Vec2 fq, double tol, int depth, Polyline& out) {
    Vec2 mid = (p + q) * 0.5;
    Vec2 fm = br.forward(mid);
    if (depth > 0 && norm(fm - (fp + fq) * 0.5) > tol) {
        refine_into(br, p, mid, fp, fm, tol, depth - 1, out);
        refine_into(br, mid, q, fm, fq, tol, depth - 1, out);
        return;
    }
    out.push_back(fq);
}

Polyline map_piece(const Branch& br, const Polyline& piece, double tol) {
    Polyline out;
    if (piece.empty()) return out;
    out.push_back(br.forward(piece[0]));
    for (std::size_t i = 0; i + 1 < piece.size(); ++i) {
        if (br.affine) {
            out.push_back(br.forward(piece[i + 1]));
        } else {
            refine_into(br, piece[i], piece[i + 1], br.forward(piece[i]), br.forward(piece[i + 1]), tol, 20, out);
        }
    }
    return out;
}

Side piece_side(const PiecewiseMap& m, const Polyline& piece) {
    for (auto p : piece) {
        double s = m.divider.side(p);
        if (std::abs(s) > kDividerTol) return s < 0 ? Side::MINUS : Side::PLUS;
    }
    if (piece.size() >= 2) return m.side_of((piece[0] + piece[1]) * 0.5);
    return Side::PLUS;
}

}  // namespace

Branch affine_branch(const Mat2& A, Vec2 t, Side tag) {
    Branch b;
    b.tag = tag;
    b.affine = true;
    b.A = A;
    b.t = t;
    b.forward = [A, t](Vec2 z) { return A * z + t; };
    b.jacobian = [A](Vec2) { return A; };
    if (A.det() != 0.0) {
        Mat2 inv = A.inverse();
        b.inverse = [inv, t](Vec2 w) { return inv * (w - t); };
    } else {
        b.inverse = [](Vec2) { return Vec2{kNaN, kNaN}; };
    }
    return b;
}

Divider line_divider(double x0, double k) {
    Divider d;
    d.linear = true;
    d.x0 = x0;
    d.k = k;
    d.phi = [x0, k](double y) { return x0 + k * y; };
    return d;
}

static int det_sign(double d) { return d > 0 ? 1 : (d < 0 ? -1 : 0); }

PiecewiseMap make_affine(const Mat2& A_minus, Vec2 t_minus, const Mat2& A_plus, Vec2 t_plus, double x0, double k,
                         const std::string& family) {
    PiecewiseMap m;
    m.family = family;
    m.minus = affine_branch(A_minus, t_minus, Side::MINUS);
    m.plus = affine_branch(A_plus, t_plus, Side::PLUS);
    m.divider = line_divider(x0, k);
    m.epsilon = det_sign(A_plus.det());
    return m;
}

PiecewiseMap make_lozi(double a, double b) {
    PiecewiseMap m = make_affine({a, 1, b, 0}, {1, 0}, {-a, 1, b, 0}, {1, 0}, 0, 0, "lozi");
    m.params = {{"a", a}, {"b", b}};
    return m;
}

PiecewiseMap make_bcnf(double tau_l, double delta_l, double tau_r, double delta_r) {
    PiecewiseMap m = make_affine({tau_l, 1, -delta_l, 0}, {1, 0}, {tau_r, 1, -delta_r, 0}, {1, 0}, 0, 0, "bcnf");
    m.params = {{"tau_l", tau_l}, {"delta_l", delta_l}, {"tau_r", tau_r}, {"delta_r", delta_r}};
    return m;
}

PiecewiseMap make_rotation(double angle) {
    double c = std::cos(angle), s = std::sin(angle);
    PiecewiseMap m = make_affine({c, -s, s, c}, {0, 0}, {c, -s, s, c}, {0, 0}, 0, 0, "rotation");
    m.params = {{"angle", angle}};
    m.window = {{-2, -2}, {2, 2}};
    return m;
}

PiecewiseMap make_smooth_lozi(double a, double b, double s) {
    PiecewiseMap m;
    m.family = "smooth_lozi";
    m.params = {{"a", a}, {"b", b}, {"s", s}};
    auto mk = [a, b, s](Side tag) {
        double sa = tag == Side::MINUS ? a : -a;
        Branch br;
        br.tag = tag;
        br.affine = false;
        br.forward = [sa, b, s](Vec2 z) { return Vec2{1 + z.y + sa * z.x + s * z.x * z.x, b * z.x}; };
        br.jacobian = [sa, b, s](Vec2 z) { return Mat2{sa + 2 * s * z.x, 1, b, 0}; };
        br.inverse = [sa, b, s](Vec2 w) {
            double x = w.y / b;
            return Vec2{x, w.x - 1 - sa * x - s * x * x};
        };
        return br;
    };
    m.minus = mk(Side::MINUS);
    m.plus = mk(Side::PLUS);
    m.divider = line_divider(0, 0);
    m.epsilon = det_sign(-b);
    return m;
}

static double get(const Params& p, const std::string& k, double dflt) {
    auto it = p.find(k);
    return it == p.end() ? dflt : it->second;
}

ParamFamily family_by_name(const std::string& name) {
    ParamFamily f;
    f.name = name;
    if (name == "lozi") {
        f.param_names = {"a", "b"};
        f.instantiate = [](const Params& p) { return make_lozi(get(p, "a", 1.9), get(p, "b", 0.1)); };
        f.in_M0 = [](const Params& p) { return get(p, "b", 0.1) == 0.0; };
    } else if (name == "bcnf") {
        f.param_names = {"tau_l", "delta_l", "tau_r", "delta_r"};
        f.instantiate = [](const Params& p) {
            return make_bcnf(get(p, "tau_l", 1.9), get(p, "delta_l", 0.1), get(p, "tau_r", -1.9),
                             get(p, "delta_r", 0.1));
        };
        f.in_M0 = [](const Params& p) { return get(p, "delta_l", 0.1) == 0.0 || get(p, "delta_r", 0.1) == 0.0; };
    } else if (name == "bcnf_sym") {
        f.param_names = {"a", "delta"};
        f.instantiate = [](const Params& p) {
            double a = get(p, "a", 1.9), d = get(p, "delta", 0.1);
            PiecewiseMap m = make_bcnf(a, d, -a, d);
            m.family = "bcnf_sym";
            m.params = {{"a", a}, {"delta", d}};
            return m;
        };
        f.in_M0 = [](const Params& p) { return get(p, "delta", 0.1) == 0.0; };
    } else if (name == "smooth_lozi") {
        f.param_names = {"a", "b", "s"};
        f.instantiate = [](const Params& p) {
            return make_smooth_lozi(get(p, "a", 1.9), get(p, "b", 0.1), get(p, "s", 0.05));
        };
        f.in_M0 = [](const Params& p) { return get(p, "b", 0.1) == 0.0; };
    } else if (name == "rotation") {
        f.param_names = {"angle"};
        f.instantiate = [](const Params& p) { return make_rotation(get(p, "angle", 1.0)); };
        f.in_M0 = [](const Params&) { return false; };
    } else {
        throw std::invalid_argument("unknown family: " + name);
    }
    return f;
}

Params parse_params(const std::string& text) {
    Params p;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw std::invalid_argument("bad parameter: " + item);
        std::string key = item.substr(0, eq);
        std::size_t used = 0;
        double v = std::stod(item.substr(eq + 1), &used);
        if (used != item.size() - eq - 1) throw std::invalid_argument("bad parameter value: " + item);
        p[key] = v;
    }
    return p;
}

std::string params_string(const Params& p) {
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& [k, v] : p) {
        if (!first) os << ',';
        os << k << '=' << v;
        first = false;
    }
    return os.str();
}

Vec2 eval(const PiecewiseMap& m, Vec2 z) { return m(z); }

std::optional<Vec2> inverse_branch(const PiecewiseMap& m, Side s, Vec2 w) {
    Vec2 z = m.branch(s).inverse(w);
    if (!finite(z)) return std::nullopt;
    double sd = m.divider.side(z);
    if (s == Side::MINUS && sd > kDividerTol) return std::nullopt;
    if (s == Side::PLUS && sd < -kDividerTol) return std::nullopt;
    return z;
}

std::optional<Vec2> inverse(const PiecewiseMap& m, Vec2 w) {
    if (auto z = inverse_branch(m, Side::PLUS, w)) return z;
    return inverse_branch(m, Side::MINUS, w);
}

std::vector<Polyline> split_at_divider(const PiecewiseMap& m, const Polyline& p) {
    std::vector<Polyline> pieces;
    if (p.empty()) return pieces;
    Polyline cur{p[0]};
    int cur_side = sgn(m.divider.side(p[0]), kDividerTol);
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        Vec2 a = p[i], b = p[i + 1];
        double sa = m.divider.side(a);
        int sb = sgn(m.divider.side(b), kDividerTol);
        if (sb == 0 || cur_side == 0 || sb == cur_side) {
            cur.push_back(b);
            if (cur_side == 0) cur_side = sb;
            continue;
        }
        if (std::abs(sa) <= kDividerTol) {
            // previous vertex on the divider: split there
            pieces.push_back(std::move(cur));
            cur = {a, b};
        } else {
            Vec2 c = crossing_point(m, a, b);
            cur.push_back(c);
            pieces.push_back(std::move(cur));
            cur = {c, b};
        }
        cur_side = sb;
    }
    pieces.push_back(std::move(cur));
    return pieces;
}

std::vector<Polyline> image_polyline(const PiecewiseMap& m, const Polyline& p, double chord_tol) {
    std::vector<Polyline> out;
    for (const auto& piece : split_at_divider(m, p)) {
        if (piece.size() < 2) continue;
        out.push_back(map_piece(m.branch(piece_side(m, piece)), piece, chord_tol));
    }
    return out;
}

Loop image_loop(const PiecewiseMap& m, const Loop& l, double chord_tol) {
    if (l.empty()) return {};
    Polyline closed = l;
    closed.push_back(l.front());
    Loop out;
    for (const auto& piece : image_polyline(m, closed, chord_tol))
        for (auto q : piece)
            if (out.empty() || !(out.back() == q)) out.push_back(q);
    if (out.size() > 1 && norm(out.back() - out.front()) < 1e-15) out.pop_back();
    return out;
}

ImageReport curve_image(const PiecewiseMap& m, const MonotoneCurve& c, const Cone& image_cone, double chord_tol) {
    ImageReport r;
    double bound = slope_bound_for(image_cone.coeff);
    auto pieces = image_polyline(m, c.samples, chord_tol);
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        MonotoneCurve mc = make_curve(Orientation::U, pieces[i], bound, c.truncated);
        if (mc.samples.size() < 2) continue;
        auto rep = validate_curve(mc, image_cone, 1e-9);
        if (!rep.valid) {
            r.valid = false;
            r.failing_pieces.push_back(r.pieces.size());
        }
        r.pieces.push_back(std::move(mc));
    }
    return r;
}

std::vector<Polyline> pullback_polyline(const PiecewiseMap& m, Side s, const Polyline& p, double chord_tol) {
    const Branch& br = m.branch(s);
    Polyline pre;
    Branch inv;
    inv.affine = br.affine;
    inv.forward = br.inverse;
    pre = map_piece(inv, p, chord_tol);
    for (auto q : pre)
        if (!finite(q)) return {};
    std::vector<Polyline> out;
    for (const auto& piece : split_at_divider(m, pre)) {
        if (piece.size() < 2) continue;
        if (piece_side(m, piece) == s) out.push_back(piece);
    }
    return out;
}

static FixedPoint fixed_point_of(const PiecewiseMap& m, Side s) {
    const Branch& br = m.branch(s);
    FixedPoint fp;
    fp.side = s;
    bool found = false;
    if (br.affine) {
        Mat2 I_A{1 - br.A.a, -br.A.b, -br.A.c, 1 - br.A.d};
        if (I_A.det() == 0.0) throw condition_error("degenerate fixed-point equation");
        fp.z = I_A.inverse() * br.t;
        found = true;
    } else {
        // Newton from a seed grid over the window
        for (int gi = 0; gi < 9 && !found; ++gi)
            for (int gj = 0; gj < 9 && !found; ++gj) {
                Vec2 z{m.window.lo.x + (gi + 0.5) / 9 * (m.window.hi.x - m.window.lo.x),
                       m.window.lo.y + (gj + 0.5) / 9 * (m.window.hi.y - m.window.lo.y)};
                for (int it = 0; it < 60; ++it) {
                    Vec2 F = br.forward(z) - z;
                    Mat2 J = br.jacobian(z);
                    Mat2 G{J.a - 1, J.b, J.c, J.d - 1};
                    if (G.det() == 0.0) break;
                    Vec2 dz = G.inverse() * F;
                    z = z - dz;
                    if (!finite(z)) break;
                    if (norm(dz) < 1e-14) break;
                }
                if (finite(z) && norm(br.forward(z) - z) < 1e-12) {
                    double sd = m.divider.side(z);
                    if ((s == Side::MINUS && sd < 0) || (s == Side::PLUS && sd > 0)) {
                        fp.z = z;
                        found = true;
                    }
                }
            }
        if (!found) throw condition_error("no fixed point found on the required side");
    }
    double sd = m.divider.side(fp.z);
    if ((s == Side::PLUS && sd <= 0) || (s == Side::MINUS && sd >= 0))
        throw condition_error(std::string("fixed point of the ") + (s == Side::PLUS ? "PLUS" : "MINUS") +
                              " branch lies on the wrong side of the divider");
    Eigen2 e = eigen(br.jacobian(fp.z));
    if (e.real) {
        fp.mu_s = e.mu_small;
        fp.mu_u = e.mu_large;
        fp.v_s = e.v_small;
        fp.v_u = e.v_large;
        fp.hyperbolic = std::abs(e.mu_small) < 1 && std::abs(e.mu_large) > 1;
    }
    return fp;
}

FixedPointData fixed_points(const PiecewiseMap& m) { return {fixed_point_of(m, Side::PLUS), fixed_point_of(m, Side::MINUS)}; }

OrientationReport orientation_report(const PiecewiseMap& m, int grid) {
    OrientationReport r;
    int seen = 0;
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            Vec2 z{m.window.lo.x + (i + 0.5) / grid * (m.window.hi.x - m.window.lo.x),
                   m.window.lo.y + (j + 0.5) / grid * (m.window.hi.y - m.window.lo.y)};
            for (Side s : {Side::MINUS, Side::PLUS}) {
                double d = m.branch(s).jacobian(z).det();
                int sg = det_sign(d);
                ++r.samples;
                if (sg == 0 || (seen != 0 && sg != seen)) r.consistent = false;
                if (seen == 0) seen = sg;
            }
        }
    r.sign = r.consistent ? seen : 0;
    return r;
}

int orientation_sign(const PiecewiseMap& m) {
    auto r = orientation_report(m);
    if (!r.consistent) throw condition_error("orientation sign not constant (S1 violated)");
    return r.sign;
}

PiecewiseMap reflect_y(const PiecewiseMap& m) {
    PiecewiseMap r = m;
    auto wrap = [](const Branch& b) {
        Branch o = b;
        auto R = [](Vec2 z) { return Vec2{z.x, -z.y}; };
        auto fw = b.forward;
        auto inv = b.inverse;
        auto jac = b.jacobian;
        o.forward = [fw, R](Vec2 z) { return R(fw(R(z))); };
        o.inverse = [inv, R](Vec2 w) { return R(inv(R(w))); };
        o.jacobian = [jac, R](Vec2 z) {
            Mat2 J = jac(R(z));
            return Mat2{J.a, -J.b, -J.c, J.d};
        };
        if (b.affine) {
            o.A = {b.A.a, -b.A.b, -b.A.c, b.A.d};
            o.t = {b.t.x, -b.t.y};
        }
        return o;
    };
    r.minus = wrap(m.minus);
    r.plus = wrap(m.plus);
    if (m.divider.linear) {
        r.divider = line_divider(m.divider.x0, -m.divider.k);
    } else {
        auto phi = m.divider.phi;
        r.divider.linear = false;
        r.divider.phi = [phi](double y) { return phi(-y); };
    }
    r.window = {{m.window.lo.x, -m.window.hi.y}, {m.window.hi.x, -m.window.lo.y}};
    r.reflected = !m.reflected;
    return r;
}

Polyline divider_polyline(const PiecewiseMap& m, double ylo, double yhi, int n) {
    if (m.divider.linear) n = 2;
    Polyline p;
    for (int i = 0; i < n; ++i) {
        double y = ylo + (yhi - ylo) * i / (n - 1);
        p.push_back({m.divider.phi(y), y});
    }
    return p;
}

Polyline divider_image(const PiecewiseMap& m, double ylo, double yhi) {
    Polyline d = divider_polyline(m, ylo, yhi, 65);
    Polyline out = map_piece(m.plus, d, 1e-9);
    if (out.size() >= 2 && out.front().x > out.back().x) std::reverse(out.begin(), out.end());
    return out;
}

double height_over_image(const PiecewiseMap& m, Vec2 z) {
    if (m.affine() && m.divider.linear) {
        Vec2 a = m.plus.forward({m.divider.phi(0), 0});
        Vec2 b = m.plus.forward({m.divider.phi(1), 1});
        Vec2 d = b - a;
        if (d.x < 0) d = -d;
        // signed distance measured vertically
        return z.y - (a.y + (z.x - a.x) * d.y / d.x);
    }
    Polyline img = divider_image(m, m.window.lo.y, m.window.hi.y);
    MonotoneCurve c = make_curve(Orientation::U, img, 0);
    auto v = c.value_at(std::clamp(z.x, c.lo(), c.hi()));
    return z.y - v.value_or(0.0);
}

bool lower_convention(const PiecewiseMap& m) {
    Vec2 z{m.divider.phi(0) - 0.1, 0};
    return height_over_image(m, m(z)) < 0;
}

PiecewiseMap normalized(const PiecewiseMap& m) { return lower_convention(m) ? m : reflect_y(m); }

}  // namespace lozi
