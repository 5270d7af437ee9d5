#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "poisonlab/boundary.hpp"
#include "poisonlab/errors.hpp"
#include "poisonlab/evaluation.hpp"
#include "poisonlab/ingestion.hpp"
#include "poisonlab/io.hpp"
#include "poisonlab/learners.hpp"
#include "poisonlab/mixture.hpp"
#include "poisonlab/poisoning.hpp"
#include "poisonlab/rng.hpp"
#include "poisonlab/subgroups.hpp"
#include "poisonlab/theory.hpp"

// Config-driven experiment runner. One JSON file describes the dataset
// source, subgroup thresholds, model ladder, attack grid, and seeds; each
// command derives everything it needs from that file so a run is fully
// reproducible from (config, master seed). Outputs carry the config hash and
// master seed, and a manifest lists every file written.

namespace poisonlab {

struct GaussianSourceConfig {
    double class_separation = 8.0;
    double subgroup_stddev = 0.6;
    int n_subgroups = 25;
    std::pair<int, int> points_per_subgroup{40, 100};
    double label_noise = 0.1;
};

struct TabularSourceConfig {
    std::filesystem::path path;
    std::filesystem::path schema_path;
};

struct TheoremConfig {
    std::vector<double> gammas{0.01, 0.02, 0.05};
    std::vector<std::size_t> ns{1000, 2000};
    std::size_t trials = 1000;
    double target_label_prob = 1.0;
    bool include_disabled_baseline = false;
};

struct BoundaryConfig {
    int target_subgroup = 0;
    double alpha = 2.0;
    int nx = 400, ny = 400;
    double bbox_pad = 0.1;
};

struct DeltaConfig {
    std::size_t ensemble_size = 8;
    std::size_t max_probes = 0;  // 0 = probe every validation member
};

struct ExperimentConfig {
    std::uint64_t master_seed = 0;
    std::string source;  // "gaussian" | "tabular"
    GaussianSourceConfig gaussian;
    TabularSourceConfig tabular;
    std::vector<std::string> selected_annotations;  // empty = all
    std::size_t min_train_size = 0;
    std::size_t min_val_size = 0;
    double val_fraction = 0.2;
    bool stratify_split = true;
    std::vector<LearnerConfig> models;
    std::vector<double> alphas{0.0, 1.0, 2.0};
    int repeats = 1;
    std::vector<int> target_subgroups;  // empty = attack every derived subgroup
    TheoremConfig theorem;
    BoundaryConfig boundary;
    DeltaConfig delta;
    std::filesystem::path output_dir = "out";
    nlohmann::json raw;  // effective config as parsed (after overrides)

    void validate() const {
        if (source != "gaussian" && source != "tabular")
            throw validation_error("config: dataset.source must be 'gaussian' or 'tabular'");
        for (double a : alphas)
            if (a < 0.0) throw validation_error("config: alphas must be nonnegative");
        if (repeats < 1) throw validation_error("config: repeats must be >= 1");
        if (models.empty()) throw validation_error("config: at least one model required");
        for (const auto& m : models) m.validate();
        if (!(val_fraction > 0.0 && val_fraction < 1.0))
            throw validation_error("config: split.val_fraction must be in (0, 1)");
    }
};

inline ExperimentConfig config_from_json(nlohmann::json j) {
    ExperimentConfig cfg;
    if (j.contains("rng") && j.at("rng").get<std::string>() != kRngName)
        throw validation_error("config: unsupported rng '" + j.at("rng").get<std::string>() +
                               "' (expected " + kRngName + ")");
    cfg.master_seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();

    const auto& dj = j.at("dataset");
    cfg.source = dj.at("source").get<std::string>();
    if (cfg.source == "gaussian") {
        cfg.gaussian.class_separation = dj.value("class_separation", cfg.gaussian.class_separation);
        cfg.gaussian.subgroup_stddev = dj.value("subgroup_stddev", cfg.gaussian.subgroup_stddev);
        cfg.gaussian.n_subgroups = dj.value("n_subgroups", cfg.gaussian.n_subgroups);
        if (dj.contains("points_per_subgroup")) {
            auto range = dj.at("points_per_subgroup").get<std::vector<int>>();
            if (range.size() != 2)
                throw validation_error("config: points_per_subgroup must be [lo, hi]");
            cfg.gaussian.points_per_subgroup = {range[0], range[1]};
        }
        cfg.gaussian.label_noise = dj.value("label_noise", cfg.gaussian.label_noise);
    } else if (cfg.source == "tabular") {
        cfg.tabular.path = dj.at("path").get<std::string>();
        cfg.tabular.schema_path = dj.at("schema").get<std::string>();
    }

    if (j.contains("annotations") && j.at("annotations").contains("selected"))
        cfg.selected_annotations =
            j.at("annotations").at("selected").get<std::vector<std::string>>();
    if (j.contains("thresholds")) {
        cfg.min_train_size = j.at("thresholds").value("min_train_size", 0);
        cfg.min_val_size = j.at("thresholds").value("min_val_size", 0);
    }
    if (j.contains("split")) {
        cfg.val_fraction = j.at("split").value("val_fraction", cfg.val_fraction);
        cfg.stratify_split = j.at("split").value("stratify", cfg.stratify_split);
    }
    for (const auto& mj : j.at("models")) cfg.models.push_back(learner_config_from_json(mj));
    if (j.contains("alphas")) cfg.alphas = j.at("alphas").get<std::vector<double>>();
    if (j.contains("repeats")) cfg.repeats = j.at("repeats").get<int>();
    if (j.contains("target_subgroups"))
        cfg.target_subgroups = j.at("target_subgroups").get<std::vector<int>>();

    if (j.contains("theorem")) {
        const auto& tj = j.at("theorem");
        if (tj.contains("gammas")) cfg.theorem.gammas = tj.at("gammas").get<std::vector<double>>();
        if (tj.contains("ns")) cfg.theorem.ns = tj.at("ns").get<std::vector<std::size_t>>();
        cfg.theorem.trials = tj.value("trials", cfg.theorem.trials);
        cfg.theorem.target_label_prob =
            tj.value("target_label_prob", cfg.theorem.target_label_prob);
        cfg.theorem.include_disabled_baseline =
            tj.value("include_disabled_baseline", cfg.theorem.include_disabled_baseline);
    }
    if (j.contains("boundary")) {
        const auto& bj = j.at("boundary");
        cfg.boundary.target_subgroup = bj.value("target_subgroup", cfg.boundary.target_subgroup);
        cfg.boundary.alpha = bj.value("alpha", cfg.boundary.alpha);
        if (bj.contains("resolution")) {
            auto res = bj.at("resolution").get<std::vector<int>>();
            if (res.size() != 2) throw validation_error("config: boundary.resolution must be [nx, ny]");
            cfg.boundary.nx = res[0];
            cfg.boundary.ny = res[1];
        }
        cfg.boundary.bbox_pad = bj.value("bbox_pad", cfg.boundary.bbox_pad);
    }
    if (j.contains("delta")) {
        cfg.delta.ensemble_size = j.at("delta").value("ensemble_size", cfg.delta.ensemble_size);
        cfg.delta.max_probes = j.at("delta").value("max_probes", cfg.delta.max_probes);
    }
    cfg.raw = std::move(j);
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw validation_error("config: " + path.string() + ": " + e.what());
    }
    try {
        return config_from_json(std::move(j));
    } catch (const nlohmann::json::exception& e) {
        throw validation_error("config: " + path.string() + ": " + e.what());
    }
}

// Hash of the canonical serialized effective config; nlohmann objects are
// key-sorted so the dump is canonical. The output directory is excluded:
// where results land does not change what they are.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
    nlohmann::json j = cfg.raw;
    j.erase("output_dir");
    return fnv1a64(j.dump());
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

inline std::string provenance_line(const ExperimentConfig& cfg) {
    return "config_hash=" + hex64(config_hash(cfg)) +
           " master_seed=" + std::to_string(cfg.master_seed) + " rng=" + kRngName;
}

struct RunOptions {
    std::filesystem::path out_dir;  // overrides config output_dir when nonempty
    int workers = 1;
    std::optional<std::uint64_t> seed_override;
    bool save_models = false;
};

inline ExperimentConfig apply_overrides(ExperimentConfig cfg, const RunOptions& options) {
    if (options.seed_override) {
        cfg.master_seed = *options.seed_override;
        cfg.raw["seed"] = *options.seed_override;
    }
    if (!options.out_dir.empty()) cfg.output_dir = options.out_dir;
    return cfg;
}

struct PreparedData {
    Dataset train;
    Dataset val;
    AnnotationSchema annotation_schema;
    std::vector<Subgroup> subgroups;          // after thresholds
    std::vector<Subgroup> all_subgroups;      // thresholds 0/0
    MixtureSpec mixture;                      // gaussian source only
    bool has_mixture = false;
    Dataset full;                             // pre-split, annotated
    LoadReport load_report;                   // tabular source only
};

inline PreparedData prepare_data(const ExperimentConfig& cfg) {
    PreparedData data;
    if (cfg.source == "gaussian") {
        auto bench = make_gaussian_benchmark(
            cfg.gaussian.class_separation, cfg.gaussian.subgroup_stddev,
            cfg.gaussian.n_subgroups, cfg.gaussian.points_per_subgroup,
            cfg.gaussian.label_noise, cfg.master_seed);
        data.mixture = std::move(bench.spec);
        data.has_mixture = true;
        data.full = with_subpop_annotations(std::move(bench.dataset), cfg.gaussian.n_subgroups);
        data.annotation_schema.feature_names = subpop_annotation_names(cfg.gaussian.n_subgroups);
    } else {
        const TabularSchema schema = load_schema(cfg.tabular.schema_path);
        data.full = load_tabular(cfg.tabular.path, schema, nullptr, &data.load_report);
        data.annotation_schema.feature_names = schema.annotation_names();
    }
    data.annotation_schema.selected = cfg.selected_annotations.empty()
                                          ? data.annotation_schema.feature_names
                                          : cfg.selected_annotations;
    auto [train_set, val_set] = split(data.full, cfg.val_fraction, cfg.master_seed,
                                      cfg.stratify_split);
    data.train = std::move(train_set);
    data.val = std::move(val_set);
    data.subgroups = derive_subgroups(data.train, data.annotation_schema, cfg.min_train_size,
                                      cfg.min_val_size, data.val);
    data.all_subgroups = derive_subgroups(data.train, data.annotation_schema, 0, 0, data.val);
    return data;
}

inline std::vector<Subgroup> select_target_subgroups(const PreparedData& data,
                                                     const ExperimentConfig& cfg) {
    if (cfg.target_subgroups.empty()) return data.subgroups;
    std::vector<Subgroup> out;
    for (int id : cfg.target_subgroups) {
        auto it = std::find_if(data.subgroups.begin(), data.subgroups.end(),
                               [&](const Subgroup& g) { return g.id == id; });
        if (it == data.subgroups.end())
            throw validation_error("config: target subgroup " + std::to_string(id) +
                                   " not present after thresholds");
        out.push_back(*it);
    }
    return out;
}

namespace detail {

inline void write_manifest(const ExperimentConfig& cfg, const std::string& command,
                           const std::vector<std::string>& outputs,
                           const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json m;
    m["command"] = command;
    m["config_hash"] = hex64(config_hash(cfg));
    m["master_seed"] = cfg.master_seed;
    m["rng"] = kRngName;
    m["outputs"] = outputs;
    m["config"] = cfg.raw;
    for (const auto& [key, value] : extra.items()) m[key] = value;
    auto out = open_output(cfg.output_dir / (command + "_manifest.json"));
    out << m.dump(2) << "\n";
}

}  // namespace detail

// Writes the realized dataset, the generative spec echo, the train/val
// splits, and the unfiltered subgroup size table; prints the table.
inline int cmd_generate(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
    if (cfg.source != "gaussian")
        throw validation_error("generate: requires a gaussian dataset source");
    const PreparedData data = prepare_data(cfg);
    const std::string prov = provenance_line(cfg);

    write_dataset_csv(data.full, cfg.output_dir / "dataset.csv", prov);
    write_dataset_csv(data.train, cfg.output_dir / "train.csv", prov);
    write_dataset_csv(data.val, cfg.output_dir / "val.csv", prov);
    {
        nlohmann::json spec_echo = mixture_to_json(data.mixture);
        spec_echo["_provenance"] = prov;
        auto out = open_output(cfg.output_dir / "mixture_spec.json");
        out << spec_echo.dump(2) << "\n";
    }
    write_subgroup_csv(data.all_subgroups, cfg.output_dir / "subgroups.csv", prov);
    detail::write_manifest(cfg, "generate",
                           {"dataset.csv", "train.csv", "val.csv", "mixture_spec.json",
                            "subgroups.csv"});

    log << "subgroup_id pattern train_size val_size\n";
    for (const auto& g : data.all_subgroups)
        log << g.id << " " << pattern_string(g.pattern) << " " << g.size << " " << g.val_size
            << "\n";
    return 0;
}

// Runs the (model x subgroup x alpha x repeat) damage matrix and writes
// per-cell JSON lines plus aggregate and summary CSVs.
inline int cmd_attack_matrix(const ExperimentConfig& cfg, const RunOptions& options,
                             std::ostream& log = std::cout) {
    const PreparedData data = prepare_data(cfg);
    const auto targets = select_target_subgroups(data, cfg);
    if (targets.empty()) throw validation_error("attack-matrix: no target subgroups");

    MatrixOptions mopts;
    mopts.workers = options.workers;
    mopts.save_models = options.save_models;
    mopts.model_dir = cfg.output_dir / "models";
    const MatrixResult result = run_matrix(data.train, data.val, targets, cfg.models,
                                           cfg.alphas, cfg.repeats, cfg.master_seed, mopts);

    const std::string prov = provenance_line(cfg);
    {
        auto out = open_output(cfg.output_dir / "damage_cells.jsonl");
        write_cells_jsonl(result, out);
    }
    {
        auto out = open_output(cfg.output_dir / "damage_aggregates.csv");
        write_aggregate_csv(result, out, prov);
    }
    {
        auto out = open_output(cfg.output_dir / "damage_summary.csv");
        write_summary_csv(result, out, prov);
    }
    write_subgroup_csv(targets, cfg.output_dir / "attacked_subgroups.csv", prov);
    detail::write_manifest(cfg, "attack_matrix",
                           {"damage_cells.jsonl", "damage_aggregates.csv", "damage_summary.csv",
                            "attacked_subgroups.csv"},
                           {{"failed_cells", result.failed_cells},
                            {"total_cells", result.cells.size()}});

    log << "cells: " << result.cells.size() << " (failed: " << result.failed_cells << ")\n";
    for (const auto& s : result.summaries)
        log << s.model_tag << " alpha=" << format_double(s.alpha)
            << " td_mean=" << format_double(s.td_mean_unweighted)
            << " collateral_mean=" << format_double(s.collateral_mean_unweighted) << "\n";
    return result.failed_cells == 0 ? 0 : 3;
}

struct TheoremRow {
    double gamma = 0.0;
    std::size_t n = 0;
    std::size_t trials = 0;
    bool attack_disabled = false;
    double success_rate = 0.0;
    double std_error = 0.0;
    double bound = 0.0;
    double tail_freq = 0.0;   // fraction of trials with |D_i| > 4 gamma n
    double tail_bound = 0.0;  // exp(-9 gamma n / 5)
    bool pass = false;        // success_rate >= bound - 3 * std_error
};

// Two-component mixture used for theorem simulations: the target
// subpopulation with weight gamma and deterministic-ish labels, and the rest.
inline MixtureSpec theorem_mixture(double gamma, double target_label_prob) {
    MixtureSpec spec;
    spec.k = 2;
    spec.weights = {gamma, 1.0 - gamma};
    spec.label_probs = {target_label_prob, 1.0 - target_label_prob};
    spec.components.push_back({0, {0.0}, {1.0}, target_label_prob});
    spec.components.push_back({1, {10.0}, {1.0}, 1.0 - target_label_prob});
    spec.validate();
    return spec;
}

inline int cmd_theorem(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
    const std::string prov = provenance_line(cfg);
    std::vector<TheoremRow> rows;
    std::vector<std::string> outputs;
    std::size_t run_index = 0;
    for (double gamma : cfg.theorem.gammas) {
        for (std::size_t n : cfg.theorem.ns) {
            const MixtureSpec spec = theorem_mixture(gamma, cfg.theorem.target_label_prob);
            std::vector<long long> modes{-1};
            if (cfg.theorem.include_disabled_baseline) modes.push_back(0);
            for (long long mode : modes) {
                const auto result = simulate_theorem1(
                    spec, n, 0, cfg.theorem.trials,
                    derive_key(cfg.master_seed, "theorem_run", run_index), mode);
                ++run_index;

                TheoremRow row;
                row.gamma = gamma;
                row.n = n;
                row.trials = cfg.theorem.trials;
                row.attack_disabled = mode == 0;
                row.success_rate = result.success_rate;
                row.std_error = result.std_error;
                row.bound = result.bound;
                const double tail_cut = 4.0 * gamma * static_cast<double>(n);
                std::size_t tail_hits = 0;
                for (const auto& t : result.trials)
                    tail_hits += static_cast<double>(t.subpop_size) > tail_cut;
                row.tail_freq = static_cast<double>(tail_hits) /
                                static_cast<double>(result.trials.size());
                row.tail_bound = std::exp(-9.0 * gamma * static_cast<double>(n) / 5.0);
                row.pass = row.attack_disabled ||
                           row.success_rate >= row.bound - 3.0 * row.std_error;
                rows.push_back(row);

                if (!row.attack_disabled) {
                    const std::string name = "theorem_trials_g" + format_double(gamma) + "_n" +
                                             std::to_string(n) + ".csv";
                    auto out = open_output(cfg.output_dir / name);
                    write_trial_log_csv(result, out, prov);
                    outputs.push_back(name);
                }
            }
        }
    }

    {
        auto out = open_output(cfg.output_dir / "theorem_report.csv");
        out << "# " << prov << "\n";
        out << "gamma,n,trials,attack_disabled,success_rate,std_error,bound,tail_freq,"
               "tail_bound,pass\n";
        for (const auto& r : rows)
            out << format_double(r.gamma) << "," << r.n << "," << r.trials << ","
                << (r.attack_disabled ? 1 : 0) << "," << format_double(r.success_rate) << ","
                << format_double(r.std_error) << "," << format_double(r.bound) << ","
                << format_double(r.tail_freq) << "," << format_double(r.tail_bound) << ","
                << (r.pass ? "PASS" : "FAIL") << "\n";
    }
    outputs.push_back("theorem_report.csv");
    detail::write_manifest(cfg, "theorem", outputs);

    bool all_pass = true;
    for (const auto& r : rows) {
        log << "gamma=" << format_double(r.gamma) << " n=" << r.n
            << (r.attack_disabled ? " [disabled]" : "")
            << " success=" << format_double(r.success_rate)
            << " bound=" << format_double(r.bound) << " " << (r.pass ? "PASS" : "FAIL") << "\n";
        all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : 3;
}

struct BoundaryRow {
    std::string model_tag;
    std::size_t param_count = 0;
    double alpha = 0.0;
    ShiftReport shift;
};

// Trains each ladder model clean and poisoned against the configured target
// subgroup, rasterizes both decision regions, and reports the shift.
inline int cmd_boundary(const ExperimentConfig& cfg, const RunOptions& options,
                        std::ostream& log = std::cout) {
    const PreparedData data = prepare_data(cfg);
    if (data.train.feature_dim != 2)
        throw validation_error("boundary: requires a 2-D dataset");

    const auto it = std::find_if(data.subgroups.begin(), data.subgroups.end(),
                                 [&](const Subgroup& g) {
                                     return g.id == cfg.boundary.target_subgroup;
                                 });
    if (it == data.subgroups.end())
        throw validation_error("boundary: target subgroup " +
                               std::to_string(cfg.boundary.target_subgroup) +
                               " not present after thresholds");
    const Subgroup& target = *it;

    const BBox bbox = data_bbox(data.train, cfg.boundary.bbox_pad);
    const BBox region = subgroup_target_region(data.train, target);
    const std::string prov = provenance_line(cfg);
    std::vector<std::string> outputs;
    std::vector<BoundaryRow> rows;

    for (const auto& base : cfg.models) {
        LearnerConfig config = base;
        config.seed = model_train_seed(cfg.master_seed, base.tag(), 0);
        const TrainedModel clean = train(config, data.train);
        auto [poisoned_ds, plan] = apply_label_flip(
            data.train, target, cfg.boundary.alpha,
            cell_attack_seed(cfg.master_seed, target.id, base.tag(), cfg.boundary.alpha, 0));
        const TrainedModel poisoned = train(config, poisoned_ds);

        const RasterGrid clean_grid = rasterize(clean, bbox, cfg.boundary.nx, cfg.boundary.ny);
        const RasterGrid poisoned_grid =
            rasterize(poisoned, bbox, cfg.boundary.nx, cfg.boundary.ny);

        BoundaryRow row;
        row.model_tag = base.tag();
        row.param_count = clean.param_count();
        row.alpha = cfg.boundary.alpha;
        row.shift = boundary_shift(clean_grid, poisoned_grid, region);
        rows.push_back(row);

        const std::string clean_name = "raster_" + base.tag() + "_clean.csv";
        const std::string poisoned_name = "raster_" + base.tag() + "_poisoned.csv";
        write_raster_csv(clean_grid, cfg.output_dir / clean_name, prov);
        write_raster_csv(poisoned_grid, cfg.output_dir / poisoned_name, prov);
        outputs.push_back(clean_name);
        outputs.push_back(poisoned_name);
        if (options.save_models) {
            save_model(clean, cfg.output_dir / ("model_" + base.tag() + "_clean.json"));
            save_model(poisoned, cfg.output_dir / ("model_" + base.tag() + "_poisoned.json"));
        }
    }

    {
        auto out = open_output(cfg.output_dir / "boundary_shift.csv");
        out << "# " << prov << "\n";
        out << "model_tag,param_count,alpha,target_subgroup,total_disagreement,"
               "inside_disagreement,outside_disagreement\n";
        for (const auto& r : rows)
            out << r.model_tag << "," << r.param_count << "," << format_double(r.alpha) << ","
                << target.id << "," << format_double(r.shift.total_disagreement) << ","
                << format_double(r.shift.inside_disagreement) << ","
                << format_double(r.shift.outside_disagreement) << "\n";
    }
    outputs.push_back("boundary_shift.csv");
    detail::write_manifest(cfg, "boundary", outputs);

    for (const auto& r : rows)
        log << r.model_tag << " inside=" << format_double(r.shift.inside_disagreement)
            << " total=" << format_double(r.shift.total_disagreement) << "\n";
    return 0;
}

// Estimates per-subgroup locality (delta) for every ladder model and writes
// per-model tables plus a capacity summary.
inline int cmd_delta(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
    const PreparedData data = prepare_data(cfg);
    const auto targets = select_target_subgroups(data, cfg);
    if (targets.empty()) throw validation_error("delta: no subgroups to probe");
    const std::string prov = provenance_line(cfg);
    std::vector<std::string> outputs;

    struct Summary {
        std::string tag;
        std::size_t param_count;
        double delta_max_mean;
        double delta_mean_mean;
    };
    std::vector<Summary> summaries;
    std::size_t run_index = 0;
    for (const auto& base : cfg.models) {
        const auto estimates =
            estimate_delta(base, data.train, targets, data.val, cfg.delta.ensemble_size,
                           derive_key(cfg.master_seed, "delta_run", run_index++),
                           cfg.delta.max_probes);
        const std::string name = "delta_" + base.tag() + ".csv";
        auto out = open_output(cfg.output_dir / name);
        write_delta_csv(estimates, out, base.tag(), prov);
        outputs.push_back(name);

        Summary s{base.tag(),
                  base.family == LearnerFamily::zero_local_oracle
                      ? 0
                      : mlp_param_count(data.train.feature_dim, base.hidden_layers),
                  0.0, 0.0};
        for (const auto& e : estimates) {
            s.delta_max_mean += e.delta_max;
            s.delta_mean_mean += e.delta_mean;
        }
        s.delta_max_mean /= static_cast<double>(estimates.size());
        s.delta_mean_mean /= static_cast<double>(estimates.size());
        summaries.push_back(std::move(s));
    }

    {
        auto out = open_output(cfg.output_dir / "delta_summary.csv");
        out << "# " << prov << "\n";
        out << "model_tag,param_count,delta_max_mean,delta_mean_mean\n";
        for (const auto& s : summaries)
            out << s.tag << "," << s.param_count << "," << format_double(s.delta_max_mean) << ","
                << format_double(s.delta_mean_mean) << "\n";
    }
    outputs.push_back("delta_summary.csv");
    detail::write_manifest(cfg, "delta", outputs);

    for (const auto& s : summaries)
        log << s.tag << " delta_max_mean=" << format_double(s.delta_max_mean) << "\n";
    return 0;
}

}  // namespace poisonlab
