#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "poisonlab/errors.hpp"
#include "poisonlab/io.hpp"
#include "poisonlab/learners.hpp"
#include "poisonlab/mixture.hpp"
#include "poisonlab/subgroups.hpp"

// Decision-region rasters for 2-D models: classify the center of every grid
// cell, then compare clean and poisoned rasters cell-by-cell to quantify how
// far the attack moved the boundary, overall and inside the attacked region.

namespace poisonlab {

struct BBox {
    double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;

    void validate() const {
        if (!(x_min < x_max) || !(y_min < y_max))
            throw validation_error("bbox: min must be strictly below max per axis");
    }

    bool contains(double x, double y) const {
        return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
    }
};

struct RasterGrid {
    BBox bbox;
    int nx = 0, ny = 0;
    std::vector<std::uint8_t> labels;  // row-major, labels[j * nx + i]

    std::uint8_t at(int i, int j) const {
        return labels[static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) +
                      static_cast<std::size_t>(i)];
    }

    double cell_center_x(int i) const {
        return bbox.x_min + (static_cast<double>(i) + 0.5) * (bbox.x_max - bbox.x_min) /
                                static_cast<double>(nx);
    }

    double cell_center_y(int j) const {
        return bbox.y_min + (static_cast<double>(j) + 0.5) * (bbox.y_max - bbox.y_min) /
                                static_cast<double>(ny);
    }
};

inline RasterGrid rasterize(const TrainedModel& model, const BBox& bbox, int nx, int ny) {
    bbox.validate();
    if (model.feature_dim != 2)
        throw unsupported_error("rasterize: model must take 2-D features");
    if (nx < 1 || ny < 1) throw validation_error("rasterize: resolution must be positive");

    RasterGrid grid;
    grid.bbox = bbox;
    grid.nx = nx;
    grid.ny = ny;
    grid.labels.resize(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny));
    std::vector<double> point(2);
    for (int j = 0; j < ny; ++j) {
        point[1] = grid.cell_center_y(j);
        for (int i = 0; i < nx; ++i) {
            point[0] = grid.cell_center_x(i);
            grid.labels[static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) +
                        static_cast<std::size_t>(i)] =
                static_cast<std::uint8_t>(predict(model, point));
        }
    }
    return grid;
}

struct ShiftReport {
    double total_disagreement = 0.0;    // fraction of all cells where labels differ
    double inside_disagreement = 0.0;   // fraction of target-region cells
    double outside_disagreement = 0.0;  // fraction of cells outside the region
    std::size_t inside_cells = 0;
    std::size_t outside_cells = 0;
    std::size_t disagreeing_cells = 0;
};

inline ShiftReport boundary_shift(const RasterGrid& clean, const RasterGrid& poisoned,
                                  const BBox& target_region) {
    if (clean.nx != poisoned.nx || clean.ny != poisoned.ny ||
        clean.bbox.x_min != poisoned.bbox.x_min || clean.bbox.x_max != poisoned.bbox.x_max ||
        clean.bbox.y_min != poisoned.bbox.y_min || clean.bbox.y_max != poisoned.bbox.y_max)
        throw validation_error("boundary_shift: grids must share bbox and resolution");
    target_region.validate();

    ShiftReport report;
    std::size_t inside_diff = 0, outside_diff = 0;
    for (int j = 0; j < clean.ny; ++j) {
        const double y = clean.cell_center_y(j);
        for (int i = 0; i < clean.nx; ++i) {
            const double x = clean.cell_center_x(i);
            const bool differs = clean.at(i, j) != poisoned.at(i, j);
            if (target_region.contains(x, y)) {
                ++report.inside_cells;
                inside_diff += differs;
            } else {
                ++report.outside_cells;
                outside_diff += differs;
            }
        }
    }
    report.disagreeing_cells = inside_diff + outside_diff;
    const std::size_t total = report.inside_cells + report.outside_cells;
    report.total_disagreement =
        static_cast<double>(report.disagreeing_cells) / static_cast<double>(total);
    if (report.inside_cells > 0)
        report.inside_disagreement =
            static_cast<double>(inside_diff) / static_cast<double>(report.inside_cells);
    if (report.outside_cells > 0)
        report.outside_disagreement =
            static_cast<double>(outside_diff) / static_cast<double>(report.outside_cells);
    return report;
}

// Bounding box of the dataset's 2-D features, padded by a fraction of each
// axis extent on both sides.
inline BBox data_bbox(const Dataset& ds, double pad_fraction = 0.1) {
    if (ds.feature_dim != 2) throw unsupported_error("data_bbox: 2-D datasets only");
    if (ds.empty()) throw validation_error("data_bbox: empty dataset");
    BBox b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& s : ds.samples) {
        b.x_min = std::min(b.x_min, s.features[0]);
        b.x_max = std::max(b.x_max, s.features[0]);
        b.y_min = std::min(b.y_min, s.features[1]);
        b.y_max = std::max(b.y_max, s.features[1]);
    }
    const double px = (b.x_max - b.x_min) * pad_fraction;
    const double py = (b.y_max - b.y_min) * pad_fraction;
    b.x_min -= px;
    b.x_max += px;
    b.y_min -= py;
    b.y_max += py;
    b.validate();
    return b;
}

// Target region for shift accounting: the bbox of the subgroup's training
// points, padded by one per-axis standard deviation of those points.
inline BBox subgroup_target_region(const Dataset& train_set, const Subgroup& subgroup) {
    if (train_set.feature_dim != 2)
        throw unsupported_error("subgroup_target_region: 2-D datasets only");
    if (subgroup.member_indices.empty())
        throw validation_error("subgroup_target_region: empty subgroup");
    double mx = 0.0, my = 0.0;
    BBox b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (std::size_t i : subgroup.member_indices) {
        const auto& f = train_set.samples[i].features;
        mx += f[0];
        my += f[1];
        b.x_min = std::min(b.x_min, f[0]);
        b.x_max = std::max(b.x_max, f[0]);
        b.y_min = std::min(b.y_min, f[1]);
        b.y_max = std::max(b.y_max, f[1]);
    }
    const double n = static_cast<double>(subgroup.member_indices.size());
    mx /= n;
    my /= n;
    double sx = 0.0, sy = 0.0;
    for (std::size_t i : subgroup.member_indices) {
        const auto& f = train_set.samples[i].features;
        sx += (f[0] - mx) * (f[0] - mx);
        sy += (f[1] - my) * (f[1] - my);
    }
    sx = std::sqrt(sx / n);
    sy = std::sqrt(sy / n);
    // Degenerate single-point subgroups still need a nonempty region.
    if (sx == 0.0) sx = 1e-6;
    if (sy == 0.0) sy = 1e-6;
    b.x_min -= sx;
    b.x_max += sx;
    b.y_min -= sy;
    b.y_max += sy;
    b.validate();
    return b;
}

// CSV matrix with a small metadata header; one row per grid row (y index).
inline void write_raster_csv(const RasterGrid& grid, std::ostream& out,
                             const std::string& provenance = "") {
    if (!provenance.empty()) out << "# " << provenance << "\n";
    out << "# bbox," << format_double(grid.bbox.x_min) << "," << format_double(grid.bbox.x_max)
        << "," << format_double(grid.bbox.y_min) << "," << format_double(grid.bbox.y_max) << "\n";
    out << "# resolution," << grid.nx << "," << grid.ny << "\n";
    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            if (i) out << ",";
            out << static_cast<int>(grid.at(i, j));
        }
        out << "\n";
    }
}

inline void write_raster_csv(const RasterGrid& grid, const std::filesystem::path& path,
                             const std::string& provenance = "") {
    auto out = open_output(path);
    write_raster_csv(grid, out, provenance);
}

}  // namespace poisonlab
