#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "poisonlab/boundary.hpp"
#include "poisonlab/mixture.hpp"

using namespace poisonlab;

namespace {

TrainedModel linear_model(double wx, double wy, double bias) {
    TrainedModel m;
    m.family = LearnerFamily::logistic_regression;
    m.layer_dims = {2, 1};
    m.parameters = {wx, wy, bias};
    m.feature_dim = 2;
    return m;
}

}  // namespace

TEST_CASE("constant classifier rasterizes to a uniform grid") {
    const auto model = linear_model(0.0, 0.0, 5.0);  // sigmoid(5) > 0.5 everywhere
    const auto grid = rasterize(model, {-1.0, 1.0, -1.0, 1.0}, 16, 16);
    for (auto v : grid.labels) CHECK(v == 1);
}

TEST_CASE("x-sign model puts the boundary at the x=0 column") {
    // weights (1, 0), bias 0: label = [x >= 0] at every cell center.
    const auto model = linear_model(1.0, 0.0, 0.0);
    const auto grid = rasterize(model, {-2.0, 2.0, -1.0, 1.0}, 40, 10);
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            const double x = grid.cell_center_x(i);
            CHECK(grid.at(i, j) == (x >= 0.0 ? 1 : 0));
        }
}

TEST_CASE("refinement keeps a linear model's labels away from the boundary") {
    const auto model = linear_model(1.0, -0.5, 0.2);
    const BBox bbox{-3.0, 3.0, -3.0, 3.0};
    const auto coarse = rasterize(model, bbox, 20, 20);
    const auto fine = rasterize(model, bbox, 40, 40);
    // Each coarse cell maps to a 2x2 block of fine cells; where the model is
    // locally constant the majority label of the block matches the coarse
    // cell. Check blocks whose four fine labels agree.
    for (int j = 0; j < coarse.ny; ++j)
        for (int i = 0; i < coarse.nx; ++i) {
            const int f00 = fine.at(2 * i, 2 * j);
            const int f10 = fine.at(2 * i + 1, 2 * j);
            const int f01 = fine.at(2 * i, 2 * j + 1);
            const int f11 = fine.at(2 * i + 1, 2 * j + 1);
            if (f00 == f10 && f10 == f01 && f01 == f11) CHECK(coarse.at(i, j) == f00);
        }
}

TEST_CASE("rasterize rejects non-2-D models and bad grids") {
    TrainedModel model3d;
    model3d.family = LearnerFamily::logistic_regression;
    model3d.layer_dims = {3, 1};
    model3d.parameters = {1.0, 1.0, 1.0, 0.0};
    model3d.feature_dim = 3;
    CHECK_THROWS_AS(rasterize(model3d, {-1, 1, -1, 1}, 8, 8), unsupported_error);
    const auto model = linear_model(1, 0, 0);
    CHECK_THROWS_AS(rasterize(model, {1.0, -1.0, -1.0, 1.0}, 8, 8), validation_error);
    CHECK_THROWS_AS(rasterize(model, {-1.0, 1.0, -1.0, 1.0}, 0, 8), validation_error);
}

TEST_CASE("identical grids have zero disagreement everywhere") {
    const auto model = linear_model(1.0, 1.0, -0.3);
    const auto grid = rasterize(model, {-2, 2, -2, 2}, 32, 32);
    const auto report = boundary_shift(grid, grid, {-1.0, 1.0, -1.0, 1.0});
    CHECK(report.total_disagreement == 0.0);
    CHECK(report.inside_disagreement == 0.0);
    CHECK(report.outside_disagreement == 0.0);
}

TEST_CASE("fully inverted grid disagrees everywhere") {
    const auto grid = rasterize(linear_model(1, 0, 0), {-2, 2, -2, 2}, 16, 16);
    RasterGrid inverted = grid;
    for (auto& v : inverted.labels) v ^= 1;
    const auto report = boundary_shift(grid, inverted, {-1.0, 1.0, -1.0, 1.0});
    CHECK(report.total_disagreement == 1.0);
    CHECK(report.inside_disagreement == 1.0);
    CHECK(report.outside_disagreement == 1.0);
}

TEST_CASE("inside and outside fractions reassemble the total") {
    const auto clean = rasterize(linear_model(1.0, 0.0, 0.0), {-2, 2, -2, 2}, 25, 25);
    const auto poisoned = rasterize(linear_model(1.0, 0.2, 0.5), {-2, 2, -2, 2}, 25, 25);
    const BBox region{-0.5, 1.5, -1.0, 1.0};
    const auto report = boundary_shift(clean, poisoned, region);
    const double reassembled =
        (report.inside_disagreement * static_cast<double>(report.inside_cells) +
         report.outside_disagreement * static_cast<double>(report.outside_cells)) /
        static_cast<double>(report.inside_cells + report.outside_cells);
    CHECK(report.total_disagreement == doctest::Approx(reassembled).epsilon(1e-12));
    CHECK(report.inside_cells + report.outside_cells == 25 * 25);
}

TEST_CASE("mismatched grids are rejected") {
    const auto a = rasterize(linear_model(1, 0, 0), {-2, 2, -2, 2}, 16, 16);
    const auto b = rasterize(linear_model(1, 0, 0), {-2, 2, -2, 2}, 8, 8);
    CHECK_THROWS_AS(boundary_shift(a, b, {-1, 1, -1, 1}), validation_error);
    const auto c = rasterize(linear_model(1, 0, 0), {-3, 2, -2, 2}, 16, 16);
    CHECK_THROWS_AS(boundary_shift(a, c, {-1, 1, -1, 1}), validation_error);
}

TEST_CASE("rasterization is deterministic") {
    const auto model = linear_model(0.7, -1.1, 0.05);
    const auto a = rasterize(model, {-2, 2, -2, 2}, 30, 30);
    const auto b = rasterize(model, {-2, 2, -2, 2}, 30, 30);
    CHECK(a.labels == b.labels);
}

TEST_CASE("data bbox pads the extent and target region pads by one stddev") {
    const auto bench = make_gaussian_benchmark(6.0, 0.5, 4, {20, 30}, 0.0, 44);
    const BBox bbox = data_bbox(bench.dataset, 0.1);
    for (const auto& s : bench.dataset.samples) {
        CHECK(bbox.contains(s.features[0], s.features[1]));
    }

    Subgroup g;
    g.id = 0;
    for (std::size_t i = 0; i < bench.dataset.size(); ++i)
        if (bench.dataset.samples[i].subpop_id == 0) g.member_indices.push_back(i);
    g.size = g.member_indices.size();
    const BBox region = subgroup_target_region(bench.dataset, g);
    for (std::size_t i : g.member_indices)
        CHECK(region.contains(bench.dataset.samples[i].features[0],
                              bench.dataset.samples[i].features[1]));
}

TEST_CASE("raster csv has resolution-shaped rows") {
    const auto grid = rasterize(linear_model(1, 0, 0), {-1, 1, -1, 1}, 4, 3);
    std::ostringstream out;
    write_raster_csv(grid, out, "prov");
    std::istringstream in(out.str());
    std::string line;
    int rows = 0, comments = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '#') {
            ++comments;
            continue;
        }
        CHECK(split_csv_line(line).size() == 4);
        ++rows;
    }
    CHECK(rows == 3);
    CHECK(comments == 3);  // provenance + bbox + resolution
}
