#include "gdn/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "gdn/error.hpp"

#include <nlohmann/json.hpp>

namespace gdn::explain {

namespace {

constexpr double kVisEps = 1e-9;

// Blue -> white -> red ramp over [0, 1].
std::array<uint8_t, 3> colormap(double u) {
    u = std::clamp(u, 0.0, 1.0);
    double r, g, b;
    if (u < 0.5) {
        const double t = u * 2.0;
        r = 0.2 + 0.8 * t;
        g = 0.3 + 0.7 * t;
        b = 1.0;
    } else {
        const double t = (u - 0.5) * 2.0;
        r = 1.0;
        g = 1.0 - 0.7 * t;
        b = 1.0 - 0.8 * t;
    }
    return {static_cast<uint8_t>(std::lround(r * 255.0)),
            static_cast<uint8_t>(std::lround(g * 255.0)),
            static_cast<uint8_t>(std::lround(b * 255.0))};
}

}  // namespace

Which which_from_string(const std::string& s) {
    if (s == "mdd") return Which::Mdd;
    if (s == "hc") return Which::Hc;
    if (s == "winner") return Which::Winner;
    throw UsageError("unknown heatmap selector '" + s + "' (mdd|hc|winner)");
}

HeatmapData heatmap_from_verdict(const detector::SegmentVerdict& v, Which which) {
    if (v.scores.empty()) {
        throw DataError("heatmap_from_verdict: verdict carries no electrode scores");
    }
    HeatmapData h;
    h.segment_label = v.subject_id + "/" + std::to_string(v.segment_index);
    h.scores.reserve(v.scores.size());
    for (const auto& s : v.scores) {
        double err;
        switch (which) {
            case Which::Mdd: err = s.err_mdd; break;
            case Which::Hc: err = s.err_hc; break;
            default: err = std::min(s.err_mdd, s.err_hc); break;
        }
        h.scores.push_back(-std::log(err + kVisEps));
    }
    h.min_score = *std::min_element(h.scores.begin(), h.scores.end());
    h.max_score = *std::max_element(h.scores.begin(), h.scores.end());
    return h;
}

Topomap render_topomap(const HeatmapData& h, int resolution) {
    const int C = static_cast<int>(h.scores.size());
    Topomap map;
    map.min_score = h.min_score;
    map.max_score = h.max_score;
    const double range = h.max_score - h.min_score;

    auto shade = [&](double v) { return colormap(range > 0.0 ? (v - h.min_score) / range : 0.5); };

    if (!h.positions) {
        // No layout known: emit the scores as a C x 1 strip.
        map.width = 1;
        map.height = C;
        map.grid = h.scores;
        map.rgb.resize(static_cast<size_t>(C) * 3);
        for (int i = 0; i < C; ++i) {
            const auto px = shade(h.scores[i]);
            std::copy(px.begin(), px.end(), map.rgb.begin() + static_cast<size_t>(i) * 3);
        }
        return map;
    }

    const auto& pos = *h.positions;
    if (static_cast<int>(pos.size()) != C) {
        throw DataError("render_topomap: positions/scores count mismatch");
    }
    for (int i = 0; i < C; ++i) {
        for (int j = i + 1; j < C; ++j) {
            if (pos[i][0] == pos[j][0] && pos[i][1] == pos[j][1]) {
                throw DataError("render_topomap: electrodes " + std::to_string(i) + " and " +
                                std::to_string(j) + " share a position");
            }
        }
    }
    if (resolution < 2) throw UsageError("render_topomap: resolution must be >= 2");

    map.width = resolution;
    map.height = resolution;
    map.grid.assign(static_cast<size_t>(resolution) * resolution,
                    std::numeric_limits<double>::quiet_NaN());
    map.rgb.assign(static_cast<size_t>(resolution) * resolution * 3, 0);

    const int k_neighbors = std::min(4, C);
    std::vector<std::pair<double, int>> dist(C);
    for (int row = 0; row < resolution; ++row) {
        // Row 0 is the top of the image (y = +1).
        const double y = 1.0 - 2.0 * row / (resolution - 1);
        for (int col = 0; col < resolution; ++col) {
            const double x = -1.0 + 2.0 * col / (resolution - 1);
            if (x * x + y * y > 1.0) continue;
            for (int e = 0; e < C; ++e) {
                const double dx = x - pos[e][0], dy = y - pos[e][1];
                dist[e] = {dx * dx + dy * dy, e};
            }
            std::partial_sort(dist.begin(), dist.begin() + k_neighbors, dist.end());
            double value;
            if (dist[0].first == 0.0) {
                value = h.scores[dist[0].second];
            } else {
                double num = 0.0, den = 0.0;
                for (int i = 0; i < k_neighbors; ++i) {
                    const double w = 1.0 / dist[i].first;  // squared distance = power-2 IDW
                    num += w * h.scores[dist[i].second];
                    den += w;
                }
                value = num / den;
            }
            const size_t idx = static_cast<size_t>(row) * resolution + col;
            map.grid[idx] = value;
            const auto px = shade(value);
            std::copy(px.begin(), px.end(), map.rgb.begin() + idx * 3);
        }
    }
    return map;
}

void write_ppm(const std::filesystem::path& path, const Topomap& map) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write pixmap: " + path.string());
    f << "P6\n" << map.width << " " << map.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(map.rgb.data()),
            static_cast<std::streamsize>(map.rgb.size()));
}

void write_grid_csv(const std::filesystem::path& path, const Topomap& map) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write grid csv: " + path.string());
    char buf[64];
    for (int r = 0; r < map.height; ++r) {
        for (int c = 0; c < map.width; ++c) {
            if (c) f << ',';
            const double v = map.grid[static_cast<size_t>(r) * map.width + c];
            if (std::isnan(v)) {
                f << "nan";
            } else {
                std::snprintf(buf, sizeof(buf), "%.17g", v);
                f << buf;
            }
        }
        f << '\n';
    }
}

void write_sidecar_json(const std::filesystem::path& path, const HeatmapData& h,
                        const Topomap& map) {
    nlohmann::json j;
    j["segment"] = h.segment_label;
    j["min"] = map.min_score;
    j["max"] = map.max_score;
    j["electrodes"] = h.scores.size();
    j["scores"] = h.scores;
    j["width"] = map.width;
    j["height"] = map.height;
    std::ofstream f(path);
    if (!f) throw DataError("cannot write sidecar: " + path.string());
    f << j.dump(2) << "\n";
}

}  // namespace gdn::explain
