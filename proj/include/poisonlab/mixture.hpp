#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "poisonlab/errors.hpp"
#include "poisonlab/io.hpp"
#include "poisonlab/rng.hpp"

// Noisy k-subpopulation mixture distributions: k components with mixture
// weights gamma_i summing to 1 and per-component Bernoulli label
// probabilities p_i. Subpopulation identity is the generative component id;
// component densities may overlap geometrically.

namespace poisonlab {

struct ComponentSpec {
    int id = 0;
    std::vector<double> mean;
    std::vector<double> stddev;     // per-dimension, strictly positive
    double class_label_prob = 0.5;  // this component's p_i
};

struct MixtureSpec {
    int k = 0;
    std::vector<ComponentSpec> components;
    std::vector<double> weights;      // gamma_1..gamma_k
    std::vector<double> label_probs;  // p_1..p_k

    int feature_dim() const {
        return components.empty() ? 0 : static_cast<int>(components[0].mean.size());
    }

    void validate() const {
        if (k <= 0 || components.empty())
            throw validation_error("mixture: k must be positive with components");
        if (static_cast<int>(components.size()) != k ||
            static_cast<int>(weights.size()) != k ||
            static_cast<int>(label_probs.size()) != k)
            throw validation_error("mixture: components/weights/label_probs must have length k");
        double sum = 0.0;
        for (double g : weights) {
            if (g <= 0.0) throw validation_error("mixture: every weight must be > 0");
            sum += g;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw validation_error("mixture: weights must sum to 1 (got " + format_double(sum) + ")");
        for (double p : label_probs)
            if (p < 0.0 || p > 1.0)
                throw validation_error("mixture: label probabilities must be in [0,1]");
        const int d = feature_dim();
        if (d == 0) throw validation_error("mixture: zero feature dimension");
        for (int i = 0; i < k; ++i) {
            const auto& c = components[i];
            if (c.id != i)
                throw validation_error("mixture: component ids must be 0..k-1 in order");
            if (static_cast<int>(c.mean.size()) != d ||
                static_cast<int>(c.stddev.size()) != d)
                throw validation_error("mixture: component dimensions disagree");
            for (double s : c.stddev)
                if (s <= 0.0) throw validation_error("mixture: stddev must be strictly positive");
        }
    }
};

struct Sample {
    std::vector<double> features;
    int label = 0;  // binary
    int subpop_id = 0;
    std::vector<std::uint8_t> annotations;  // 0/1, empty for synthetic data
};

struct Dataset {
    std::vector<Sample> samples;
    int feature_dim = 0;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    void validate() const {
        for (const auto& s : samples) {
            if (static_cast<int>(s.features.size()) != feature_dim)
                throw validation_error("dataset: inconsistent feature dimension");
            if (s.label != 0 && s.label != 1)
                throw validation_error("dataset: labels must be binary");
        }
    }
};

// Draws n i.i.d. samples: component categorically by gamma, features from the
// component's axis-aligned Gaussian, label Bernoulli(p_i).
inline Dataset sample_dataset(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n < 1) throw validation_error("sample_dataset: n must be >= 1");
    RngStream rng(seed, "sample_dataset");
    CategoricalSampler pick(spec.weights);
    const int d = spec.feature_dim();

    Dataset ds;
    ds.feature_dim = d;
    ds.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        int comp = pick.draw(rng);
        const auto& c = spec.components[comp];
        Sample& s = ds.samples[i];
        s.features.resize(d);
        for (int j = 0; j < d; ++j) s.features[j] = rng.normal(c.mean[j], c.stddev[j]);
        s.label = rng.bernoulli(spec.label_probs[comp]) ? 1 : 0;
        s.subpop_id = comp;
    }
    return ds;
}

struct GaussianBenchmark {
    MixtureSpec spec;
    Dataset dataset;
    std::size_t flipped_count = 0;  // labels flipped by the noise step
};

// Synthetic 2-D two-class benchmark: class centers at (+-class_separation/2, 0),
// subgroup centers scattered isotropically around their class center with
// subgroup_stddev, points drawn isotropically around each subgroup center, a
// fraction label_noise of labels flipped afterwards.
//
// Per-subgroup point spread is subgroup_stddev / 8, so subgroups form
// distinct clusters within the class-level scatter. Component i belongs to
// class i % 2. Noise flips the first floor(label_noise * N) positions of a
// seeded permutation, on a substream separate from point generation, so the
// noise-free run with the same seed yields the same geometry.
inline GaussianBenchmark make_gaussian_benchmark(double class_separation,
                                                 double subgroup_stddev,
                                                 int n_subgroups,
                                                 std::pair<int, int> points_per_subgroup_range,
                                                 double label_noise,
                                                 std::uint64_t seed) {
    if (class_separation <= 0.0) throw validation_error("gaussian: class_separation must be positive");
    if (subgroup_stddev <= 0.0) throw validation_error("gaussian: subgroup_stddev must be positive");
    if (n_subgroups < 2) throw validation_error("gaussian: need at least 2 subgroups");
    if (label_noise < 0.0 || label_noise >= 0.5)
        throw validation_error("gaussian: label_noise must be in [0, 0.5)");
    auto [lo, hi] = points_per_subgroup_range;
    if (lo < 1 || hi < lo) throw validation_error("gaussian: empty points-per-subgroup range");

    const double center_scatter = subgroup_stddev;
    const double point_stddev = subgroup_stddev / 8.0;
    RngStream centers_rng(seed, "gaussian_centers");
    RngStream counts_rng(seed, "gaussian_counts");
    RngStream points_rng(seed, "gaussian_points");
    RngStream flips_rng(seed, "gaussian_flips");

    GaussianBenchmark out;
    out.spec.k = n_subgroups;

    std::vector<int> counts(n_subgroups);
    std::size_t total = 0;
    std::vector<std::array<double, 2>> means(n_subgroups);
    for (int i = 0; i < n_subgroups; ++i) {
        const int cls = i % 2;
        const double cx = (cls == 0 ? -0.5 : 0.5) * class_separation;
        means[i] = {centers_rng.normal(cx, center_scatter),
                    centers_rng.normal(0.0, center_scatter)};
        counts[i] = static_cast<int>(counts_rng.uniform_int_range(lo, hi));
        total += static_cast<std::size_t>(counts[i]);
    }

    out.dataset.feature_dim = 2;
    out.dataset.samples.reserve(total);
    for (int i = 0; i < n_subgroups; ++i) {
        const int cls = i % 2;
        for (int p = 0; p < counts[i]; ++p) {
            Sample s;
            s.features = {points_rng.normal(means[i][0], point_stddev),
                          points_rng.normal(means[i][1], point_stddev)};
            s.label = cls;
            s.subpop_id = i;
            out.dataset.samples.push_back(std::move(s));
        }
    }

    const std::size_t n_flips =
        static_cast<std::size_t>(std::floor(label_noise * static_cast<double>(total)));
    if (n_flips > 0) {
        std::vector<std::size_t> order(total);
        for (std::size_t i = 0; i < total; ++i) order[i] = i;
        flips_rng.shuffle(order);
        for (std::size_t i = 0; i < n_flips; ++i)
            out.dataset.samples[order[i]].label ^= 1;
    }
    out.flipped_count = n_flips;

    for (int i = 0; i < n_subgroups; ++i) {
        const int cls = i % 2;
        ComponentSpec c;
        c.id = i;
        c.mean = {means[i][0], means[i][1]};
        c.stddev = {point_stddev, point_stddev};
        c.class_label_prob = cls == 1 ? 1.0 - label_noise : label_noise;
        out.spec.weights.push_back(static_cast<double>(counts[i]) / static_cast<double>(total));
        out.spec.label_probs.push_back(c.class_label_prob);
        out.spec.components.push_back(std::move(c));
    }
    out.spec.validate();
    return out;
}

// Exposes subpop_id as a one-hot annotation vector so the annotation-subgroup
// machinery applies to synthetic mixture data. Annotation j is "subpop_j".
inline Dataset with_subpop_annotations(Dataset ds, int k) {
    for (auto& s : ds.samples) {
        if (s.subpop_id < 0 || s.subpop_id >= k)
            throw validation_error("with_subpop_annotations: subpop_id out of range");
        s.annotations.assign(static_cast<std::size_t>(k), 0);
        s.annotations[static_cast<std::size_t>(s.subpop_id)] = 1;
    }
    return ds;
}

inline std::vector<std::string> subpop_annotation_names(int k) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) names.push_back("subpop_" + std::to_string(i));
    return names;
}

// CSV: feature_0..feature_{d-1},label,subpop_id,annotations. Annotations are a
// 0/1 string, empty allowed. Lines starting with '#' are provenance comments.
inline void write_dataset_csv(const Dataset& ds, std::ostream& out,
                              const std::string& provenance = "") {
    if (!provenance.empty()) out << "# " << provenance << "\n";
    for (int j = 0; j < ds.feature_dim; ++j) out << "feature_" << j << ",";
    out << "label,subpop_id,annotations\n";
    for (const auto& s : ds.samples) {
        for (double f : s.features) out << format_double(f) << ",";
        out << s.label << "," << s.subpop_id << ",";
        for (std::uint8_t a : s.annotations) out << (a ? '1' : '0');
        out << "\n";
    }
}

inline void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path,
                              const std::string& provenance = "") {
    auto out = open_output(path);
    write_dataset_csv(ds, out, provenance);
}

inline Dataset read_dataset_csv(std::istream& in) {
    Dataset ds;
    std::string line;
    bool header_seen = false;
    int d = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_csv_line(line);
        if (!header_seen) {
            if (cells.size() < 3) throw io_error("dataset csv: malformed header");
            d = static_cast<int>(cells.size()) - 3;
            for (int j = 0; j < d; ++j)
                if (cells[static_cast<std::size_t>(j)] != "feature_" + std::to_string(j))
                    throw io_error("dataset csv: unexpected header column " + cells[j]);
            ds.feature_dim = d;
            header_seen = true;
            continue;
        }
        if (static_cast<int>(cells.size()) != d + 3)
            throw io_error("dataset csv: wrong cell count in row");
        Sample s;
        s.features.reserve(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) s.features.push_back(parse_double(cells[static_cast<std::size_t>(j)]));
        s.label = static_cast<int>(parse_int(cells[static_cast<std::size_t>(d)]));
        s.subpop_id = static_cast<int>(parse_int(cells[static_cast<std::size_t>(d) + 1]));
        for (char c : cells[static_cast<std::size_t>(d) + 2]) {
            if (c != '0' && c != '1') throw io_error("dataset csv: annotations must be 0/1");
            s.annotations.push_back(c == '1' ? 1 : 0);
        }
        ds.samples.push_back(std::move(s));
    }
    if (!header_seen) throw io_error("dataset csv: empty file");
    return ds;
}

inline Dataset read_dataset_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_dataset_csv(in);
}

inline nlohmann::json mixture_to_json(const MixtureSpec& spec) {
    nlohmann::json j;
    j["k"] = spec.k;
    j["weights"] = spec.weights;
    j["label_probs"] = spec.label_probs;
    auto& comps = j["components"] = nlohmann::json::array();
    for (const auto& c : spec.components)
        comps.push_back({{"id", c.id},
                         {"mean", c.mean},
                         {"stddev", c.stddev},
                         {"class_label_prob", c.class_label_prob}});
    return j;
}

inline MixtureSpec mixture_from_json(const nlohmann::json& j) {
    MixtureSpec spec;
    spec.k = j.at("k").get<int>();
    spec.weights = j.at("weights").get<std::vector<double>>();
    spec.label_probs = j.at("label_probs").get<std::vector<double>>();
    for (const auto& cj : j.at("components")) {
        ComponentSpec c;
        c.id = cj.at("id").get<int>();
        c.mean = cj.at("mean").get<std::vector<double>>();
        c.stddev = cj.at("stddev").get<std::vector<double>>();
        c.class_label_prob = cj.at("class_label_prob").get<double>();
        spec.components.push_back(std::move(c));
    }
    spec.validate();
    return spec;
}

}  // namespace poisonlab
