#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "poisonlab/errors.hpp"
#include "poisonlab/io.hpp"
#include "poisonlab/mixture.hpp"

// Annotation-product subpopulations: select m binary annotation features and
// partition the data by the 2^m possible patterns. Only realized patterns
// materialize; ids are the rank of the pattern in lexicographic order over
// all realized patterns, so ids are stable for a given dataset regardless of
// filtering thresholds.

namespace poisonlab {

struct AnnotationSchema {
    std::vector<std::string> feature_names;  // the full ordered tuple A
    std::vector<std::string> selected;       // A' (subset, order defines the pattern)

    void validate() const {
        if (selected.empty()) throw validation_error("annotation schema: A' must be nonempty");
        for (std::size_t i = 0; i < selected.size(); ++i) {
            if (std::find(feature_names.begin(), feature_names.end(), selected[i]) ==
                feature_names.end())
                throw validation_error("annotation schema: unknown feature '" + selected[i] + "'");
            for (std::size_t j = i + 1; j < selected.size(); ++j)
                if (selected[i] == selected[j])
                    throw validation_error("annotation schema: duplicate selection '" + selected[i] + "'");
        }
    }

    std::vector<std::size_t> selected_indices() const {
        std::vector<std::size_t> idx;
        idx.reserve(selected.size());
        for (const auto& name : selected) {
            auto it = std::find(feature_names.begin(), feature_names.end(), name);
            idx.push_back(static_cast<std::size_t>(it - feature_names.begin()));
        }
        return idx;
    }
};

struct Subgroup {
    int id = 0;
    std::vector<std::uint8_t> pattern;       // v in {0,1}^m
    std::vector<std::size_t> member_indices; // sorted, into the training dataset
    std::size_t size = 0;                    // == member_indices.size()
    std::vector<std::size_t> val_member_indices;
    std::size_t val_size = 0;
};

namespace detail {
inline std::vector<std::uint8_t> project_annotations(const Sample& s,
                                                     const std::vector<std::size_t>& idx,
                                                     std::size_t expected_len) {
    if (s.annotations.size() != expected_len)
        throw validation_error("subgroups: sample annotation length " +
                               std::to_string(s.annotations.size()) + " != schema length " +
                               std::to_string(expected_len));
    std::vector<std::uint8_t> v;
    v.reserve(idx.size());
    for (std::size_t i : idx) v.push_back(s.annotations[i]);
    return v;
}
}  // namespace detail

// Subgroups for every realized pattern whose training membership is at least
// min_train_size and validation membership at least min_val_size. Unfiltered
// subgroups partition both datasets.
inline std::vector<Subgroup> derive_subgroups(const Dataset& dataset,
                                              const AnnotationSchema& schema,
                                              std::size_t min_train_size,
                                              std::size_t min_val_size,
                                              const Dataset& val_dataset) {
    schema.validate();
    const auto idx = schema.selected_indices();
    const std::size_t a_len = schema.feature_names.size();

    // std::map iterates patterns in lexicographic order.
    std::map<std::vector<std::uint8_t>, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
        by_pattern;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i)
        by_pattern[detail::project_annotations(dataset.samples[i], idx, a_len)].first.push_back(i);
    for (std::size_t i = 0; i < val_dataset.samples.size(); ++i)
        by_pattern[detail::project_annotations(val_dataset.samples[i], idx, a_len)].second.push_back(i);

    std::vector<Subgroup> out;
    int id = 0;
    for (auto& [pattern, members] : by_pattern) {
        Subgroup g;
        g.id = id++;
        g.pattern = pattern;
        g.member_indices = std::move(members.first);
        g.size = g.member_indices.size();
        g.val_member_indices = std::move(members.second);
        g.val_size = g.val_member_indices.size();
        if (g.size >= min_train_size && g.val_size >= min_val_size)
            out.push_back(std::move(g));
    }
    return out;
}

// The filter function F: 1 iff the sample's projected annotations equal the
// subgroup pattern.
inline bool filter_membership(const Subgroup& subgroup, const Sample& sample,
                              const AnnotationSchema& schema) {
    const auto idx = schema.selected_indices();
    return detail::project_annotations(sample, idx, schema.feature_names.size()) ==
           subgroup.pattern;
}

inline std::string pattern_string(const std::vector<std::uint8_t>& pattern) {
    std::string s;
    s.reserve(pattern.size());
    for (std::uint8_t b : pattern) s.push_back(b ? '1' : '0');
    return s;
}

inline void write_subgroup_csv(const std::vector<Subgroup>& subgroups, std::ostream& out,
                               const std::string& provenance = "") {
    if (!provenance.empty()) out << "# " << provenance << "\n";
    out << "subgroup_id,pattern,train_size,val_size\n";
    for (const auto& g : subgroups)
        out << g.id << "," << pattern_string(g.pattern) << "," << g.size << "," << g.val_size
            << "\n";
}

inline void write_subgroup_csv(const std::vector<Subgroup>& subgroups,
                               const std::filesystem::path& path,
                               const std::string& provenance = "") {
    auto out = open_output(path);
    write_subgroup_csv(subgroups, out, provenance);
}

}  // namespace poisonlab
