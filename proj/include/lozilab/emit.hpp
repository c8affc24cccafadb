#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lozilab/attractor.hpp"
#include "lozilab/geometry.hpp"
#include "lozilab/scanlab.hpp"

namespace lozi {

inline constexpr int kSchemaVersion = 1;

class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path);
// creates missing parent directories; message carries the OS error text
void write_text(const std::string& path, const std::string& content);

std::string records_csv(const std::vector<ClassificationRecord>& records);
nlohmann::json to_json(const ClassificationRecord& r);
ClassificationRecord record_from_json(const nlohmann::json& j);
// {"schema_version", "kind", "payload"}
nlohmann::json envelope(const std::string& kind, nlohmann::json payload);
nlohmann::json records_json(const std::vector<ClassificationRecord>& records);
std::vector<ClassificationRecord> records_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrappingReport& r);
nlohmann::json to_json(const HausdorffReport& r);
nlohmann::json to_json(const MixingReport& r);
nlohmann::json to_json(const BasinEstimate& b);
nlohmann::json to_json(const TangencyLocus& l);
nlohmann::json to_json(const LReport& r);

std::string points_csv(const std::vector<Vec2>& pts);

struct SvgLayer {
    std::vector<Vec2> points;
    std::vector<Polyline> lines;
    std::vector<Loop> loops;
    std::string color = "#000";
    double radius = 0.6;
    double width = 0.8;
};

struct SvgPlot {
    BBox window;
    std::vector<SvgLayer> layers;
    std::string title;
    std::size_t point_cap = 200000;
    int pixels = 800;
};

// every k-th point, k = ceil(n / cap); the kept count is at most cap
std::vector<Vec2> stride_downsample(const std::vector<Vec2>& pts, std::size_t cap, std::size_t* stride = nullptr);
// points above the cap are downsampled and a note is written into the figure
std::string render_svg(const SvgPlot& plot);
// verdict grid over two parameter axes, one cell per record
std::string parameter_map_svg(const std::vector<ClassificationRecord>& records, const std::string& x,
                              const std::string& y, const std::vector<std::string>& conditions);

}  // namespace lozi
