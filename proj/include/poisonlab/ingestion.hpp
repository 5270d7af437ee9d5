#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "poisonlab/errors.hpp"
#include "poisonlab/io.hpp"
#include "poisonlab/mixture.hpp"
#include "poisonlab/rng.hpp"

// Adult-like tabular ingestion. A schema declares column kinds, the binary
// target, and annotation definitions (column plus the set of values mapping
// to 1). Numeric columns are standardized, categorical columns one-hot
// encoded with levels discovered from the training file; the fitted encoding
// can be reapplied to other files so validation data never contributes
// statistics.

namespace poisonlab {

enum class ColumnKind { numeric, categorical, ignore };

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::categorical;
};

struct AnnotationDef {
    std::string name;
    std::string column;
    std::vector<std::string> values;  // annotation is 1 iff the cell matches one of these
};

struct TabularSchema {
    std::vector<ColumnSpec> columns;  // in file order
    bool has_header = false;
    std::string target_column;
    std::vector<std::string> target_positive_values;
    std::string missing_marker = "?";
    std::vector<AnnotationDef> annotations;

    const ColumnSpec& column(const std::string& name) const {
        for (const auto& c : columns)
            if (c.name == name) return c;
        throw validation_error("schema: unknown column '" + name + "'");
    }

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i].name == name) return i;
        throw validation_error("schema: unknown column '" + name + "'");
    }

    void validate() const {
        if (columns.empty()) throw validation_error("schema: no columns");
        if (target_column.empty()) throw validation_error("schema: no target column");
        column_index(target_column);
        if (target_positive_values.empty())
            throw validation_error("schema: target_positive_values must be nonempty");
        for (const auto& a : annotations) {
            const auto& col = column(a.column);
            if (col.kind == ColumnKind::numeric)
                throw validation_error("schema: annotation '" + a.name +
                                       "' references numeric column; binarize via values of a "
                                       "categorical column");
            if (a.values.empty())
                throw validation_error("schema: annotation '" + a.name + "' has no values");
        }
    }

    std::vector<std::string> annotation_names() const {
        std::vector<std::string> names;
        names.reserve(annotations.size());
        for (const auto& a : annotations) names.push_back(a.name);
        return names;
    }
};

struct LoadReport {
    std::size_t rows_read = 0;
    std::size_t rows_dropped = 0;  // missing values or unseen categorical levels
};

// Encoding fitted on the training file: standardization statistics per
// numeric column and sorted level sets per categorical column.
struct TabularEncoding {
    std::vector<std::string> numeric_columns;
    std::vector<double> numeric_mean;
    std::vector<double> numeric_std;
    std::vector<std::string> categorical_columns;
    std::vector<std::vector<std::string>> categorical_levels;
    std::vector<std::string> feature_names;  // expanded, in encoded order
};

namespace detail {

struct RawTable {
    std::vector<std::vector<std::string>> rows;
    std::size_t rows_read = 0;
    std::size_t rows_dropped_missing = 0;
};

inline RawTable read_raw_table(const std::filesystem::path& path, const TabularSchema& schema) {
    auto in = open_input(path);
    RawTable table;
    std::string line;
    bool header_pending = schema.has_header;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string trimmed = trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        if (header_pending) {
            header_pending = false;
            auto cells = split_csv_line(trimmed);
            if (cells.size() != schema.columns.size())
                throw io_error("tabular: header has " + std::to_string(cells.size()) +
                               " columns, schema declares " +
                               std::to_string(schema.columns.size()));
            continue;
        }
        auto cells = split_csv_line(trimmed);
        if (cells.size() != schema.columns.size())
            throw io_error("tabular: row " + std::to_string(line_no) + " has " +
                           std::to_string(cells.size()) + " cells, expected " +
                           std::to_string(schema.columns.size()));
        ++table.rows_read;
        bool missing = false;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            cells[c] = trim(cells[c]);
            if (schema.columns[c].kind != ColumnKind::ignore &&
                cells[c] == schema.missing_marker)
                missing = true;
        }
        if (missing) {
            ++table.rows_dropped_missing;
            continue;
        }
        table.rows.push_back(std::move(cells));
    }
    return table;
}

inline double parse_numeric_cell(const std::string& cell, const std::string& column,
                                 std::size_t row) {
    try {
        return parse_double(cell);
    } catch (const io_error&) {
        throw io_error("tabular: row " + std::to_string(row) + ", column '" + column +
                       "': cannot parse numeric value '" + cell + "'");
    }
}

}  // namespace detail

// Fits the encoding on the file and returns the encoded dataset. Row order is
// preserved (minus dropped rows). Sample.subpop_id is 0 for tabular data;
// subgroup structure comes from the annotations.
inline Dataset load_tabular(const std::filesystem::path& path, const TabularSchema& schema,
                            TabularEncoding* out_encoding = nullptr,
                            LoadReport* out_report = nullptr) {
    schema.validate();
    auto table = detail::read_raw_table(path, schema);

    TabularEncoding enc;
    const std::size_t target_idx = schema.column_index(schema.target_column);
    std::vector<std::size_t> numeric_idx, categorical_idx;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        if (c == target_idx) continue;
        if (schema.columns[c].kind == ColumnKind::numeric) {
            numeric_idx.push_back(c);
            enc.numeric_columns.push_back(schema.columns[c].name);
        } else if (schema.columns[c].kind == ColumnKind::categorical) {
            categorical_idx.push_back(c);
            enc.categorical_columns.push_back(schema.columns[c].name);
        }
    }

    for (std::size_t k = 0; k < numeric_idx.size(); ++k) {
        double sum = 0.0, sum2 = 0.0;
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            const double v = detail::parse_numeric_cell(table.rows[r][numeric_idx[k]],
                                                        enc.numeric_columns[k], r);
            sum += v;
            sum2 += v * v;
        }
        const double n = static_cast<double>(table.rows.size());
        const double mean = sum / n;
        double var = sum2 / n - mean * mean;
        if (var < 0.0) var = 0.0;
        enc.numeric_mean.push_back(mean);
        enc.numeric_std.push_back(var > 0.0 ? std::sqrt(var) : 1.0);  // constant column maps to 0
    }
    for (std::size_t k = 0; k < categorical_idx.size(); ++k) {
        std::set<std::string> levels;
        for (const auto& row : table.rows) levels.insert(row[categorical_idx[k]]);
        enc.categorical_levels.emplace_back(levels.begin(), levels.end());
    }
    for (std::size_t k = 0; k < numeric_idx.size(); ++k)
        enc.feature_names.push_back(enc.numeric_columns[k]);
    for (std::size_t k = 0; k < categorical_idx.size(); ++k)
        for (const auto& level : enc.categorical_levels[k])
            enc.feature_names.push_back(enc.categorical_columns[k] + "=" + level);

    // Encode rows with the fitted statistics.
    Dataset ds;
    ds.feature_dim = static_cast<int>(enc.feature_names.size());
    ds.samples.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        Sample s;
        s.features.reserve(static_cast<std::size_t>(ds.feature_dim));
        for (std::size_t k = 0; k < numeric_idx.size(); ++k) {
            const double v = detail::parse_numeric_cell(row[numeric_idx[k]],
                                                        enc.numeric_columns[k], r);
            s.features.push_back((v - enc.numeric_mean[k]) / enc.numeric_std[k]);
        }
        for (std::size_t k = 0; k < categorical_idx.size(); ++k) {
            const auto& levels = enc.categorical_levels[k];
            const std::string& v = row[categorical_idx[k]];
            for (const auto& level : levels) s.features.push_back(level == v ? 1.0 : 0.0);
        }
        const std::string& tv = row[target_idx];
        s.label = std::find(schema.target_positive_values.begin(),
                            schema.target_positive_values.end(),
                            tv) != schema.target_positive_values.end()
                      ? 1
                      : 0;
        s.subpop_id = 0;
        s.annotations.reserve(schema.annotations.size());
        for (const auto& a : schema.annotations) {
            const std::string& cell = row[schema.column_index(a.column)];
            const bool hit =
                std::find(a.values.begin(), a.values.end(), cell) != a.values.end();
            s.annotations.push_back(hit ? 1 : 0);
        }
        ds.samples.push_back(std::move(s));
    }

    if (out_encoding) *out_encoding = enc;
    if (out_report) {
        out_report->rows_read = table.rows_read;
        out_report->rows_dropped = table.rows_dropped_missing;
    }
    return ds;
}

// Encodes another file with a previously fitted encoding. Rows carrying
// categorical levels unseen at fit time are dropped and counted.
inline Dataset load_tabular(const std::filesystem::path& path, const TabularSchema& schema,
                            const TabularEncoding& enc, LoadReport* out_report = nullptr) {
    schema.validate();
    auto table = detail::read_raw_table(path, schema);
    const std::size_t target_idx = schema.column_index(schema.target_column);

    std::vector<std::size_t> numeric_idx, categorical_idx;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        if (c == target_idx) continue;
        if (schema.columns[c].kind == ColumnKind::numeric) numeric_idx.push_back(c);
        else if (schema.columns[c].kind == ColumnKind::categorical) categorical_idx.push_back(c);
    }
    if (numeric_idx.size() != enc.numeric_columns.size() ||
        categorical_idx.size() != enc.categorical_columns.size())
        throw validation_error("load_tabular: encoding does not match schema");

    Dataset ds;
    ds.feature_dim = static_cast<int>(enc.feature_names.size());
    std::size_t dropped_unseen = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        bool unseen = false;
        for (std::size_t k = 0; k < categorical_idx.size() && !unseen; ++k) {
            const auto& levels = enc.categorical_levels[k];
            unseen = std::find(levels.begin(), levels.end(), row[categorical_idx[k]]) ==
                     levels.end();
        }
        if (unseen) {
            ++dropped_unseen;
            continue;
        }
        Sample s;
        s.features.reserve(static_cast<std::size_t>(ds.feature_dim));
        for (std::size_t k = 0; k < numeric_idx.size(); ++k) {
            const double v = detail::parse_numeric_cell(row[numeric_idx[k]],
                                                        enc.numeric_columns[k], r);
            s.features.push_back((v - enc.numeric_mean[k]) / enc.numeric_std[k]);
        }
        for (std::size_t k = 0; k < categorical_idx.size(); ++k)
            for (const auto& level : enc.categorical_levels[k])
                s.features.push_back(level == row[categorical_idx[k]] ? 1.0 : 0.0);
        const std::string& tv = row[target_idx];
        s.label = std::find(schema.target_positive_values.begin(),
                            schema.target_positive_values.end(),
                            tv) != schema.target_positive_values.end()
                      ? 1
                      : 0;
        s.subpop_id = 0;
        for (const auto& a : schema.annotations) {
            const std::string& cell = row[schema.column_index(a.column)];
            s.annotations.push_back(
                std::find(a.values.begin(), a.values.end(), cell) != a.values.end() ? 1 : 0);
        }
        ds.samples.push_back(std::move(s));
    }
    if (out_report) {
        out_report->rows_read = table.rows_read;
        out_report->rows_dropped = table.rows_dropped_missing + dropped_unseen;
    }
    return ds;
}

struct SplitReport {
    std::vector<std::string> warnings;
};

// Deterministic seeded split. Stratification groups rows by annotation
// pattern when annotations exist, else by subpop_id; each stratum contributes
// round(val_fraction * size) validation rows. Strata smaller than 2 go
// entirely to train.
inline std::pair<Dataset, Dataset> split(const Dataset& dataset, double val_fraction,
                                         std::uint64_t seed, bool stratify_by_subgroup,
                                         SplitReport* report = nullptr) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw validation_error("split: val_fraction must be in (0, 1)");
    if (dataset.empty()) throw validation_error("split: empty dataset");

    std::map<std::vector<std::uint8_t>, std::vector<std::size_t>> strata;
    if (stratify_by_subgroup) {
        for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
            const Sample& s = dataset.samples[i];
            std::vector<std::uint8_t> key = s.annotations;
            if (key.empty()) {
                // fall back to the generative subpopulation id
                key.resize(sizeof(int));
                std::memcpy(key.data(), &s.subpop_id, sizeof(int));
            }
            strata[std::move(key)].push_back(i);
        }
    } else {
        auto& all = strata[{}];
        all.resize(dataset.samples.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    }

    RngStream rng(seed, "split");
    std::vector<std::uint8_t> in_val(dataset.samples.size(), 0);
    for (auto& [key, members] : strata) {
        if (stratify_by_subgroup && members.size() < 2) {
            if (report)
                report->warnings.push_back("stratum of size " + std::to_string(members.size()) +
                                           " assigned entirely to train");
            continue;
        }
        const auto n_val = static_cast<std::size_t>(std::llround(
            val_fraction * static_cast<double>(members.size())));
        auto chosen = rng.sample_without_replacement(members.size(), n_val);
        for (std::size_t c : chosen) in_val[members[c]] = 1;
    }

    Dataset train_set, val_set;
    train_set.feature_dim = dataset.feature_dim;
    val_set.feature_dim = dataset.feature_dim;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i)
        (in_val[i] ? val_set : train_set).samples.push_back(dataset.samples[i]);
    return {std::move(train_set), std::move(val_set)};
}

inline TabularSchema schema_from_json(const nlohmann::json& j) {
    TabularSchema schema;
    schema.has_header = j.value("has_header", false);
    schema.missing_marker = j.value("missing_marker", std::string("?"));
    for (const auto& cj : j.at("columns")) {
        ColumnSpec c;
        c.name = cj.at("name").get<std::string>();
        const std::string kind = cj.at("kind").get<std::string>();
        if (kind == "numeric") c.kind = ColumnKind::numeric;
        else if (kind == "categorical") c.kind = ColumnKind::categorical;
        else if (kind == "ignore") c.kind = ColumnKind::ignore;
        else throw validation_error("schema: unknown column kind '" + kind + "'");
        schema.columns.push_back(std::move(c));
    }
    schema.target_column = j.at("target").at("column").get<std::string>();
    schema.target_positive_values =
        j.at("target").at("positive_values").get<std::vector<std::string>>();
    if (j.contains("annotations")) {
        for (const auto& aj : j.at("annotations")) {
            AnnotationDef a;
            a.name = aj.at("name").get<std::string>();
            a.column = aj.at("column").get<std::string>();
            a.values = aj.at("values").get<std::vector<std::string>>();
            schema.annotations.push_back(std::move(a));
        }
    }
    schema.validate();
    return schema;
}

inline TabularSchema load_schema(const std::filesystem::path& path) {
    return schema_from_json(nlohmann::json::parse(read_file(path)));
}

}  // namespace poisonlab
