#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gdn/detector.hpp"

namespace gdn::explain {

enum class Which { Mdd, Hc, Winner };

Which which_from_string(const std::string& s);

// Per-electrode fit-quality scores; higher means the selected generator
// reproduced that electrode better.
struct HeatmapData {
    std::vector<double> scores;
    std::optional<std::vector<std::array<double, 2>>> positions;
    double min_score = 0.0;
    double max_score = 0.0;
    std::string segment_label;
};

// score = -log(err + 1e-9) of the selected generator's error.
HeatmapData heatmap_from_verdict(const detector::SegmentVerdict& v, Which which);

// Rendered grid. With positions: resolution x resolution samples of an
// inverse-distance interpolation (power 2, nearest 4 electrodes) masked to the
// unit disk; cells outside the disk hold NaN. Without positions: a C x 1
// score strip.
struct Topomap {
    int width = 0;
    int height = 0;
    std::vector<double> grid;    // row-major, NaN = outside mask
    std::vector<uint8_t> rgb;    // 3 bytes per cell
    double min_score = 0.0;
    double max_score = 0.0;
};

Topomap render_topomap(const HeatmapData& h, int resolution);

void write_ppm(const std::filesystem::path& path, const Topomap& map);
void write_grid_csv(const std::filesystem::path& path, const Topomap& map);
void write_sidecar_json(const std::filesystem::path& path, const HeatmapData& h,
                        const Topomap& map);

}  // namespace gdn::explain
