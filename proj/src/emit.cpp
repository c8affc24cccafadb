#include "lozilab/emit.hpp"

#include <cerrno>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace lozi {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(path + ": " + std::strerror(errno));
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw io_error(path + ": " + std::strerror(errno));
    return ss.str();
}

void write_text(const std::string& path, const std::string& content) {
    fs::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
        if (ec) throw io_error(p.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error(path + ": " + std::strerror(errno));
    out << content;
    out.flush();
    if (!out) throw io_error(path + ": " + std::strerror(errno));
}

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string o = "\"";
    for (char c : s) {
        if (c == '"') o += '"';
        o += c;
    }
    return o + "\"";
}

std::string mu_text(const Params& p) {
    std::string s;
    for (const auto& [k, v] : p) {
        if (!s.empty()) s += ';';
        s += k + "=" + num(v);
    }
    return s;
}

Verdict verdict_from(const std::string& s) {
    if (s == "PASS") return Verdict::PASS;
    if (s == "FAIL") return Verdict::FAIL;
    if (s == "INDETERMINATE") return Verdict::INDETERMINATE;
    throw std::invalid_argument("bad verdict: " + s);
}

json vec(Vec2 v) { return json::array({v.x, v.y}); }

}  // namespace

std::string records_csv(const std::vector<ClassificationRecord>& records) {
    std::string out = "family,mu,epsilon,lambda_est,m0";
    for (const auto& id : condition_ids()) out += "," + id;
    out += ",error\n";
    for (const auto& r : records) {
        out += csv_field(r.family) + "," + csv_field(mu_text(r.mu)) + "," + std::to_string(r.epsilon) + "," +
               num(r.lambda_est) + "," + (r.m0 ? "1" : "0");
        for (const auto& id : condition_ids()) {
            auto it = r.verdicts.find(id);
            out += "," + (it == r.verdicts.end() ? std::string("INDETERMINATE") : to_string(it->second.verdict));
        }
        out += "," + csv_field(r.error) + "\n";
    }
    return out;
}

json to_json(const ClassificationRecord& r) {
    json v = json::object();
    for (const auto& [id, cv] : r.verdicts)
        v[id] = {{"verdict", to_string(cv.verdict)}, {"stamp", cv.stamp}, {"note", cv.note}};
    return {{"family", r.family}, {"mu", r.mu},         {"epsilon", r.epsilon}, {"lambda_est", r.lambda_est},
            {"m0", r.m0},         {"verdicts", v},      {"metrics", r.metrics}, {"error", r.error}};
}

ClassificationRecord record_from_json(const json& j) {
    ClassificationRecord r;
    r.family = j.at("family").get<std::string>();
    r.mu = j.at("mu").get<Params>();
    r.epsilon = j.at("epsilon").get<int>();
    r.lambda_est = j.at("lambda_est").get<double>();
    r.m0 = j.at("m0").get<bool>();
    for (const auto& [id, cv] : j.at("verdicts").items())
        r.verdicts[id] = {verdict_from(cv.at("verdict").get<std::string>()), cv.at("stamp").get<std::string>(),
                          cv.at("note").get<std::string>()};
    r.metrics = j.at("metrics").get<std::map<std::string, double>>();
    r.error = j.at("error").get<std::string>();
    return r;
}

json envelope(const std::string& kind, json payload) {
    return {{"schema_version", kSchemaVersion}, {"kind", kind}, {"payload", std::move(payload)}};
}

json records_json(const std::vector<ClassificationRecord>& records) {
    json arr = json::array();
    for (const auto& r : records) arr.push_back(to_json(r));
    return envelope("classification_records", arr);
}

std::vector<ClassificationRecord> records_from_json(const json& j) {
    if (j.at("schema_version").get<int>() != kSchemaVersion)
        throw std::invalid_argument("unsupported schema_version " + j.at("schema_version").dump());
    if (j.at("kind") != "classification_records") throw std::invalid_argument("not a record list");
    std::vector<ClassificationRecord> out;
    for (const auto& r : j.at("payload")) out.push_back(record_from_json(r));
    return out;
}

json to_json(const TrappingReport& r) {
    return {{"verdict", to_string(r.verdict)},
            {"margin", r.margin},
            {"image_vertices", r.image_vertices},
            {"detail", r.detail}};
}

json to_json(const HausdorffReport& r) {
    return {{"distance", r.distance},
            {"cover_to_wu", r.cover_to_wu},
            {"wu_to_cover", r.wu_to_cover},
            {"worst_cover", vec(r.worst_cover)},
            {"worst_wu", vec(r.worst_wu)}};
}

json to_json(const MixingReport& r) {
    return {{"verdict", to_string(r.verdict)}, {"nodes", r.nodes},
            {"edges", r.edges},                {"leaked", r.leaked},
            {"strongly_connected", r.strongly_connected}, {"positive_power", r.positive_power},
            {"empty_rows", r.empty_rows}};
}

json to_json(const BasinEstimate& b) {
    return {{"n_samples", b.n_samples},
            {"horizon", b.horizon},
            {"tail", b.tail},
            {"fraction_converging", b.fraction_converging},
            {"std_error", b.std_error},
            {"h", b.h},
            {"seed", b.seed}};
}

json to_json(const TangencyLocus& l) {
    json vs = json::array();
    for (const auto& v : l.vertices)
        vs.push_back({{"mu", v.mu},
                      {"offset", v.offset},
                      {"tower_height", v.tower_height},
                      {"cone_coefficient", v.cone_coefficient},
                      {"lambda", v.lambda}});
    return {{"index", l.index},         {"free_param", l.free_param}, {"slide_param", l.slide_param},
            {"step", l.step},           {"vertices", vs},             {"reached_M0", l.reached_M0},
            {"truncated", l.truncated}, {"stop_reason", l.stop_reason}};
}

json to_json(const LReport& r) {
    return {{"L1", to_string(r.L1)},       {"L2", to_string(r.L2)},
            {"L3", to_string(r.L3)},       {"L4", to_string(r.L4)},
            {"det_max", r.det_max},        {"lambda", r.lambda},
            {"trapping_margin", r.trapping_margin}, {"L4_components", r.L4_components},
            {"detail", r.detail}};
}

std::string points_csv(const std::vector<Vec2>& pts) {
    std::string out = "x,y\n";
    for (auto p : pts) out += num(p.x) + "," + num(p.y) + "\n";
    return out;
}

std::vector<Vec2> stride_downsample(const std::vector<Vec2>& pts, std::size_t cap, std::size_t* stride) {
    std::size_t k = 1;
    if (cap > 0 && pts.size() > cap) k = (pts.size() + cap - 1) / cap;
    if (stride) *stride = k;
    if (k == 1) return pts;
    std::vector<Vec2> out;
    out.reserve(pts.size() / k + 1);
    for (std::size_t i = 0; i < pts.size(); i += k) out.push_back(pts[i]);
    return out;
}

namespace {

struct Frame {
    BBox w;
    double px, sx, sy;
    Vec2 map(Vec2 p) const { return {(p.x - w.lo.x) * sx, px - (p.y - w.lo.y) * sy}; }
};

std::string coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string path_of(const Frame& f, const std::vector<Vec2>& pts, bool closed) {
    std::string d;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        Vec2 q = f.map(pts[i]);
        d += (i ? " L" : "M") + coord(q.x) + " " + coord(q.y);
    }
    if (closed) d += " Z";
    return d;
}

std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

}  // namespace

std::string render_svg(const SvgPlot& plot) {
    BBox w = plot.window;
    if (w.empty()) {
        for (const auto& l : plot.layers) {
            for (auto p : l.points) w.add(p);
            for (const auto& pl : l.lines)
                for (auto p : pl) w.add(p);
            for (const auto& lp : l.loops)
                for (auto p : lp) w.add(p);
        }
        if (w.empty()) w = BBox{{-1, -1}, {1, 1}};
    }
    double dx = std::max(w.hi.x - w.lo.x, 1e-12), dy = std::max(w.hi.y - w.lo.y, 1e-12);
    double px = plot.pixels;
    double wpx = px * dx / dy;
    if (wpx > 2 * px) {
        wpx = 2 * px;
    }
    Frame f{w, px, wpx / dx, px / dy};

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << coord(wpx) << "\" height=\"" << coord(px + 40)
      << "\" viewBox=\"0 -20 " << coord(wpx) << " " << coord(px + 40) << "\">\n";
    s << "<rect x=\"0\" y=\"0\" width=\"" << coord(wpx) << "\" height=\"" << coord(px)
      << "\" fill=\"white\" stroke=\"#888\"/>\n";
    if (!plot.title.empty()) s << "<text x=\"4\" y=\"-6\" font-size=\"12\">" << escape(plot.title) << "</text>\n";
    std::size_t total = 0;
    for (const auto& l : plot.layers) total += l.points.size();
    std::string note;
    for (const auto& l : plot.layers) {
        for (const auto& lp : l.loops)
            s << "<path d=\"" << path_of(f, lp, true) << "\" fill=\"none\" stroke=\"" << l.color
              << "\" stroke-width=\"" << l.width << "\"/>\n";
        for (const auto& pl : l.lines)
            s << "<path d=\"" << path_of(f, pl, false) << "\" fill=\"none\" stroke=\"" << l.color
              << "\" stroke-width=\"" << l.width << "\"/>\n";
        if (l.points.empty()) continue;
        std::size_t share = total > plot.point_cap
                                ? std::max<std::size_t>(1, plot.point_cap * l.points.size() / total)
                                : l.points.size();
        std::size_t stride = 1;
        auto kept = stride_downsample(l.points, share, &stride);
        if (stride > 1)
            note += "downsampled " + std::to_string(l.points.size()) + " -> " + std::to_string(kept.size()) +
                    " points (stride " + std::to_string(stride) + "); ";
        s << "<g fill=\"" << l.color << "\">\n";
        for (auto p : kept) {
            Vec2 q = f.map(p);
            s << "<circle cx=\"" << coord(q.x) << "\" cy=\"" << coord(q.y) << "\" r=\"" << l.radius << "\"/>\n";
        }
        s << "</g>\n";
    }
    if (!note.empty())
        s << "<text class=\"note\" x=\"4\" y=\"" << coord(px + 14) << "\" font-size=\"11\">" << escape(note)
          << "</text>\n";
    s << "</svg>\n";
    return s.str();
}

std::string parameter_map_svg(const std::vector<ClassificationRecord>& records, const std::string& x,
                              const std::string& y, const std::vector<std::string>& conditions) {
    std::set<double> xs, ys;
    for (const auto& r : records) {
        auto ix = r.mu.find(x), iy = r.mu.find(y);
        if (ix != r.mu.end()) xs.insert(ix->second);
        if (iy != r.mu.end()) ys.insert(iy->second);
    }
    if (xs.empty()) xs.insert(0);
    if (ys.empty()) ys.insert(0);
    const double cell = 24;
    double W = cell * xs.size(), H = cell * ys.size();
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << coord(W + 80) << "\" height=\"" << coord(H + 60)
      << "\">\n<g transform=\"translate(60,10)\">\n";
    std::vector<double> xv(xs.begin(), xs.end()), yv(ys.begin(), ys.end());
    for (const auto& r : records) {
        auto ix = r.mu.find(x), iy = r.mu.find(y);
        double vx = ix == r.mu.end() ? 0 : ix->second, vy = iy == r.mu.end() ? 0 : iy->second;
        std::size_t cx = std::lower_bound(xv.begin(), xv.end(), vx) - xv.begin();
        std::size_t cy = std::lower_bound(yv.begin(), yv.end(), vy) - yv.begin();
        bool any_fail = false, all_pass = true;
        for (const auto& c : conditions) {
            auto it = r.verdicts.find(c);
            Verdict v = it == r.verdicts.end() ? Verdict::INDETERMINATE : it->second.verdict;
            any_fail |= v == Verdict::FAIL;
            all_pass &= v == Verdict::PASS;
        }
        const char* fill = all_pass ? "#3a3" : any_fail ? "#c33" : "#aaa";
        s << "<rect x=\"" << coord(cx * cell) << "\" y=\"" << coord(H - (cy + 1) * cell) << "\" width=\""
          << coord(cell) << "\" height=\"" << coord(cell) << "\" fill=\"" << fill << "\" stroke=\"white\"/>\n";
    }
    std::string label;
    for (const auto& c : conditions) label += (label.empty() ? "" : "&amp;") + c;
    s << "</g>\n<text x=\"60\" y=\"" << coord(H + 30) << "\" font-size=\"12\">" << escape(x) << " ["
      << num(xv.front()) << ", " << num(xv.back()) << "]; " << escape(y) << " [" << num(yv.front()) << ", "
      << num(yv.back()) << "]; green = " << label << " PASS</text>\n</svg>\n";
    return s.str();
}

}  // namespace lozi
