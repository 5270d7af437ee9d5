#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "poisonlab/ingestion.hpp"
#include "poisonlab/subgroups.hpp"

using namespace poisonlab;

namespace {

namespace fs = std::filesystem;

fs::path write_temp(const std::string& name, const std::string& content) {
    const fs::path path = fs::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path;
}

TabularSchema small_schema() {
    TabularSchema schema;
    schema.has_header = true;
    schema.columns = {{"x", ColumnKind::numeric},
                      {"group", ColumnKind::categorical},
                      {"outcome", ColumnKind::categorical}};
    schema.target_column = "outcome";
    schema.target_positive_values = {"yes"};
    schema.annotations = {{"group=a", "group", {"a"}}};
    return schema;
}

}  // namespace

TEST_CASE("numeric columns standardize to zero mean and unit variance") {
    const auto path = write_temp("poisonlab_std.csv",
                                 "x,group,outcome\n"
                                 "1,a,yes\n"
                                 "2,a,no\n"
                                 "3,b,yes\n");
    const Dataset ds = load_tabular(path, small_schema());
    fs::remove(path);
    REQUIRE(ds.size() == 3);
    CHECK(ds.samples[0].features[0] == doctest::Approx(-1.2247).epsilon(1e-4));
    CHECK(ds.samples[1].features[0] == doctest::Approx(0.0).epsilon(1e-8));
    CHECK(ds.samples[2].features[0] == doctest::Approx(1.2247).epsilon(1e-4));
}

TEST_CASE("categorical columns one-hot encode with rows summing to 1") {
    const auto path = write_temp("poisonlab_onehot.csv",
                                 "x,group,outcome\n"
                                 "1,a,yes\n"
                                 "2,b,no\n"
                                 "3,a,yes\n");
    TabularEncoding enc;
    const Dataset ds = load_tabular(path, small_schema(), &enc);
    fs::remove(path);
    // features: x, group=a, group=b
    REQUIRE(ds.feature_dim == 3);
    CHECK(enc.feature_names[1] == "group=a");
    CHECK(enc.feature_names[2] == "group=b");
    for (const auto& s : ds.samples) CHECK(s.features[1] + s.features[2] == 1.0);
    // invertibility: the hot index recovers the value
    CHECK(ds.samples[0].features[1] == 1.0);
    CHECK(ds.samples[1].features[2] == 1.0);
}

TEST_CASE("target and annotations are materialized") {
    const auto path = write_temp("poisonlab_target.csv",
                                 "x,group,outcome\n"
                                 "1,a,yes\n"
                                 "2,b,no\n");
    const Dataset ds = load_tabular(path, small_schema());
    fs::remove(path);
    CHECK(ds.samples[0].label == 1);
    CHECK(ds.samples[1].label == 0);
    CHECK(ds.samples[0].annotations == std::vector<std::uint8_t>{1});
    CHECK(ds.samples[1].annotations == std::vector<std::uint8_t>{0});
}

TEST_CASE("rows with missing values are dropped and counted") {
    const auto path = write_temp("poisonlab_missing.csv",
                                 "x,group,outcome\n"
                                 "1,a,yes\n"
                                 "?,b,no\n"
                                 "3,?,yes\n"
                                 "4,b,no\n");
    LoadReport report;
    const Dataset ds = load_tabular(path, small_schema(), nullptr, &report);
    fs::remove(path);
    CHECK(report.rows_read == 4);
    CHECK(report.rows_dropped == 2);
    CHECK(ds.size() == 2);
}

TEST_CASE("unparseable numeric cells report the row") {
    const auto path = write_temp("poisonlab_badnum.csv",
                                 "x,group,outcome\n"
                                 "abc,a,yes\n");
    CHECK_THROWS_AS(load_tabular(path, small_schema()), io_error);
    fs::remove(path);
}

TEST_CASE("wrong cell counts report the row") {
    const auto path = write_temp("poisonlab_badrow.csv",
                                 "x,group,outcome\n"
                                 "1,a\n");
    CHECK_THROWS_AS(load_tabular(path, small_schema()), io_error);
    fs::remove(path);
}

TEST_CASE("a fitted encoding reuses training statistics on new files") {
    const auto train_path = write_temp("poisonlab_enc_train.csv",
                                       "x,group,outcome\n"
                                       "1,a,yes\n"
                                       "3,b,no\n");
    const auto val_path = write_temp("poisonlab_enc_val.csv",
                                     "x,group,outcome\n"
                                     "2,a,yes\n"
                                     "5,c,no\n");  // unseen level c drops
    TabularEncoding enc;
    const Dataset train = load_tabular(train_path, small_schema(), &enc);
    LoadReport report;
    const Dataset val = load_tabular(val_path, small_schema(), enc, &report);
    fs::remove(train_path);
    fs::remove(val_path);

    // train stats: mean 2, std 1 -> val x=2 encodes to 0 under train stats
    REQUIRE(val.size() == 1);
    CHECK(report.rows_dropped == 1);
    CHECK(val.samples[0].features[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(val.feature_dim == train.feature_dim);
}

TEST_CASE("split produces an 80/20 partition") {
    Dataset ds;
    ds.feature_dim = 1;
    for (int i = 0; i < 100; ++i) {
        Sample s;
        s.features = {static_cast<double>(i)};
        s.label = i % 2;
        ds.samples.push_back(std::move(s));
    }
    const auto [train, val] = split(ds, 0.2, 5, false);
    CHECK(train.size() == 80);
    CHECK(val.size() == 20);

    std::set<double> seen;
    for (const auto& s : train.samples) seen.insert(s.features[0]);
    for (const auto& s : val.samples) CHECK(seen.insert(s.features[0]).second);
    CHECK(seen.size() == 100);
}

TEST_CASE("stratified split takes round(fraction * size) from each stratum") {
    Dataset ds;
    ds.feature_dim = 1;
    for (int g = 0; g < 3; ++g)
        for (int i = 0; i < 10; ++i) {
            Sample s;
            s.features = {static_cast<double>(g * 10 + i)};
            s.annotations = {static_cast<std::uint8_t>(g & 1), static_cast<std::uint8_t>(g >> 1)};
            ds.samples.push_back(std::move(s));
        }
    const auto [train, val] = split(ds, 0.2, 7, true);
    CHECK(val.size() == 6);  // exactly 2 per 10-sample stratum

    std::map<std::vector<std::uint8_t>, int> val_counts;
    for (const auto& s : val.samples) val_counts[s.annotations]++;
    for (const auto& [key, count] : val_counts) CHECK(count == 2);
}

TEST_CASE("tiny strata go entirely to train with a warning") {
    Dataset ds;
    ds.feature_dim = 1;
    for (int i = 0; i < 20; ++i) {
        Sample s;
        s.features = {static_cast<double>(i)};
        s.annotations = {0};
        ds.samples.push_back(std::move(s));
    }
    Sample lone;
    lone.features = {99.0};
    lone.annotations = {1};
    ds.samples.push_back(std::move(lone));

    SplitReport report;
    const auto [train, val] = split(ds, 0.25, 3, true, &report);
    CHECK(report.warnings.size() == 1);
    for (const auto& s : val.samples) CHECK(s.annotations[0] == 0);
}

TEST_CASE("split is deterministic in the seed") {
    Dataset ds;
    ds.feature_dim = 1;
    for (int i = 0; i < 50; ++i) {
        Sample s;
        s.features = {static_cast<double>(i)};
        ds.samples.push_back(std::move(s));
    }
    const auto [t1, v1] = split(ds, 0.3, 11, false);
    const auto [t2, v2] = split(ds, 0.3, 11, false);
    REQUIRE(v1.size() == v2.size());
    for (std::size_t i = 0; i < v1.size(); ++i)
        CHECK(v1.samples[i].features == v2.samples[i].features);
    const auto [t3, v3] = split(ds, 0.3, 12, false);
    bool identical = v1.size() == v3.size();
    if (identical)
        for (std::size_t i = 0; i < v1.size(); ++i)
            identical = identical && v1.samples[i].features == v3.samples[i].features;
    CHECK_FALSE(identical);
}

TEST_CASE("split rejects bad fractions") {
    Dataset ds;
    ds.feature_dim = 1;
    Sample s;
    s.features = {0.0};
    ds.samples.push_back(s);
    CHECK_THROWS_AS(split(ds, 0.0, 1, false), validation_error);
    CHECK_THROWS_AS(split(ds, 1.0, 1, false), validation_error);
}

TEST_CASE("schema json parses and validates") {
    const auto j = nlohmann::json::parse(R"({
        "has_header": true,
        "columns": [
            {"name": "x", "kind": "numeric"},
            {"name": "group", "kind": "categorical"},
            {"name": "junk", "kind": "ignore"},
            {"name": "outcome", "kind": "categorical"}
        ],
        "target": {"column": "outcome", "positive_values": ["yes"]},
        "annotations": [{"name": "group=a", "column": "group", "values": ["a"]}]
    })");
    const TabularSchema schema = schema_from_json(j);
    CHECK(schema.columns.size() == 4);
    CHECK(schema.annotations.size() == 1);

    auto bad = j;
    bad["annotations"][0]["column"] = "x";  // numeric annotation source
    CHECK_THROWS_AS(schema_from_json(bad), validation_error);
}

// Runs only when the real UCI Adult training file is available; point
// POISONLAB_ADULT_PATH at adult.data.
TEST_CASE("real adult file: row count and subgroup count") {
    const char* adult_path = std::getenv("POISONLAB_ADULT_PATH");
    if (!adult_path) return;

    const TabularSchema schema =
        load_schema(fs::path(POISONLAB_SOURCE_DIR) / "data" / "adult_schema.json");
    LoadReport report;
    const Dataset ds = load_tabular(adult_path, schema, nullptr, &report);
    CHECK(report.rows_read == 32561);

    AnnotationSchema ann{schema.annotation_names(), schema.annotation_names()};
    Dataset empty_val;
    empty_val.feature_dim = ds.feature_dim;
    const auto subgroups = derive_subgroups(ds, ann, 100, 0, empty_val);
    CHECK(subgroups.size() == 63);
}
