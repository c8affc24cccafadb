#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "lozilab/attractor.hpp"
#include "lozilab/maps.hpp"

namespace lozi {

// condition ids in output order
const std::vector<std::string>& condition_ids();

struct ConditionVerdict {
    Verdict verdict = Verdict::INDETERMINATE;
    std::string stamp;  // tolerance or resolution the verdict was computed at
    std::string note;
};

struct ClassificationRecord {
    std::string family;
    Params mu;
    std::map<std::string, ConditionVerdict> verdicts;
    double lambda_est = 0;
    int epsilon = 0;
    bool m0 = false;
    std::map<std::string, double> metrics;  // margins, c_min, tower height, ...
    std::string error;  // node-level failure, verdicts stay INDETERMINATE
};

struct Budgets {
    std::size_t cone_samples = 10000;
    int resolution = 256;  // h = diam(window)/resolution for the trapping checks
    int n_max = 6;         // return strips checked
    std::size_t strip_samples = 200;
    int tangency_index = 3;
    bool attractor_checks = true;  // L2, L4
    std::uint64_t seed = 1;
};

ClassificationRecord classify_parameter(const ParamFamily& fam, const Params& mu, const Budgets& b);

struct AxisRange {
    std::string name;
    double lo = 0, hi = 0;
    int count = 1;
    double at(int k) const { return count <= 1 ? lo : lo + (hi - lo) * k / (count - 1); }
};

struct ScanConfig {
    std::string family = "lozi";
    Params fixed;
    std::vector<AxisRange> axes;
    Budgets budgets;
    int threads = 0;
    std::string out_csv = "scan.csv";
    std::string out_json = "scan.json";
    std::string out_svg;  // parameter map, optional
};

// grid nodes with the first axis varying slowest
std::vector<Params> grid_nodes(const ScanConfig& cfg);
std::vector<ClassificationRecord> scan_grid(const ScanConfig& cfg);

struct LocusVertex {
    Params mu;
    double offset = 0;
    double tower_height = 0;
    double cone_coefficient = 0;  // c_min of the synthesized unstable cones
    double lambda = 0;
};

struct TangencyLocus {
    int index = 0;
    std::string free_param, slide_param;
    double step = 0;
    std::vector<LocusVertex> vertices;
    bool reached_M0 = false;  // stopped on cone coefficient below m0_tol
    bool truncated = false;   // corrector failed
    std::string stop_reason;
};

struct TangencyStart {
    Params base;
    std::string param;  // searched on [lo, hi]
    double lo = 0, hi = 0;
};

// pseudo-arclength continuation of offset(u_mu, gamma_i) = 0 in the (param, slide) plane,
// oriented so that slide decreases first
TangencyLocus trace_tangency(const ParamFamily& fam, int i, const TangencyStart& start, const std::string& slide,
                             int steps, double step = 0.01, double m0_tol = 5e-3);

// [section] / key = value, '#' comments
class usage_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Config {
    std::map<std::string, std::map<std::string, std::string>> sections;
    std::string get(const std::string& section, const std::string& key, const std::string& fallback = "") const;
    bool has(const std::string& section, const std::string& key) const;
};

Config parse_config(const std::string& text);
Config load_config(const std::string& path);
// axes as "a=1.5:2.0:6" entries separated by ';'
std::vector<AxisRange> parse_axes(const std::string& text);
ScanConfig scan_config_from(const Config& c);

}  // namespace lozi
