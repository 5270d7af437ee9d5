#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "poisonlab/errors.hpp"
#include "poisonlab/io.hpp"
#include "poisonlab/learners.hpp"
#include "poisonlab/mixture.hpp"
#include "poisonlab/parallel.hpp"
#include "poisonlab/poisoning.hpp"
#include "poisonlab/rng.hpp"
#include "poisonlab/subgroups.hpp"

// Target damage is the clean model's validation accuracy on the attacked
// subgroup minus the poisoned model's; collateral damage is the same
// difference outside the subgroup. The matrix runner trains one clean model
// per (model config, repeat) and shares it across every subgroup and alpha;
// the poisoned counterpart reuses the clean training seed so the difference
// isolates the attack rather than training noise.

namespace poisonlab {

inline double accuracy(const TrainedModel& model, std::span<const Sample> samples) {
    if (samples.empty()) throw validation_error("accuracy: empty sample set");
    std::size_t correct = 0;
    for (const auto& s : samples)
        correct += static_cast<std::size_t>(predict(model, s.features, s.subpop_id) == s.label);
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

inline double target_damage(const TrainedModel& clean, const TrainedModel& poisoned,
                            std::span<const Sample> val_target) {
    if (val_target.empty())
        throw validation_error("target_damage: empty target validation set");
    if (clean.feature_dim != poisoned.feature_dim)
        throw validation_error("target_damage: models disagree on feature_dim");
    return accuracy(clean, val_target) - accuracy(poisoned, val_target);
}

inline double collateral_damage(const TrainedModel& clean, const TrainedModel& poisoned,
                                std::span<const Sample> val_rest) {
    if (val_rest.empty())
        throw validation_error("collateral_damage: empty rest validation set");
    return accuracy(clean, val_rest) - accuracy(poisoned, val_rest);
}

struct DamageReport {
    int subgroup_id = 0;
    std::size_t subgroup_size = 0;  // training membership
    double alpha = 0.0;
    std::string model_tag;
    std::size_t param_count = 0;
    int repeat_index = 0;
    std::uint64_t train_seed = 0;
    std::uint64_t attack_seed = 0;
    std::size_t budget = 0;

    double clean_target_acc = 0.0;
    double poisoned_target_acc = 0.0;
    double target_damage = 0.0;  // clean_target_acc - poisoned_target_acc
    double clean_rest_acc = 0.0;
    double poisoned_rest_acc = 0.0;
    double collateral_damage = 0.0;
    std::size_t target_val_count = 0;
    std::size_t rest_val_count = 0;
    std::size_t clean_target_correct = 0;
    std::size_t poisoned_target_correct = 0;
    std::size_t clean_rest_correct = 0;
    std::size_t poisoned_rest_correct = 0;

    bool failed = false;
    std::string error;
};

struct AggregateReport {
    int subgroup_id = 0;
    std::size_t subgroup_size = 0;
    double alpha = 0.0;
    std::string model_tag;
    std::size_t param_count = 0;
    std::size_t repeats = 0;
    double td_mean = 0.0;
    double td_std = 0.0;
    double collateral_mean = 0.0;
    double collateral_std = 0.0;
    double clean_target_acc_mean = 0.0;
    double poisoned_target_acc_mean = 0.0;
};

// Across-subgroup averages per (model, alpha), emitted both unweighted and
// weighted by subgroup training size.
struct ModelAlphaSummary {
    std::string model_tag;
    std::size_t param_count = 0;
    double alpha = 0.0;
    std::size_t cells = 0;
    double td_mean_unweighted = 0.0;
    double td_mean_size_weighted = 0.0;
    double collateral_mean_unweighted = 0.0;
};

struct MatrixResult {
    std::vector<DamageReport> cells;
    std::vector<AggregateReport> aggregates;
    std::vector<ModelAlphaSummary> summaries;
    std::size_t failed_cells = 0;
};

struct MatrixOptions {
    int workers = 1;
    bool save_models = false;
    std::filesystem::path model_dir;
};

namespace detail {

struct PredCounts {
    std::size_t target_correct = 0;
    std::size_t rest_correct = 0;
};

inline PredCounts count_correct(const TrainedModel& model, const Dataset& val,
                                const std::vector<std::uint8_t>& in_target) {
    PredCounts c;
    for (std::size_t i = 0; i < val.samples.size(); ++i) {
        const Sample& s = val.samples[i];
        const bool ok = predict(model, s.features, s.subpop_id) == s.label;
        if (in_target[i])
            c.target_correct += ok;
        else
            c.rest_correct += ok;
    }
    return c;
}

inline double mean_of(const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline double sample_std(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

// Per-cell attack seed: stable hash of (master seed, subgroup id, model tag,
// alpha, repeat index).
inline std::uint64_t cell_attack_seed(std::uint64_t master_seed, int subgroup_id,
                                      const std::string& model_tag, double alpha,
                                      int repeat_index) {
    const std::string key = model_tag + "|g" + std::to_string(subgroup_id) + "|a" +
                            format_double(alpha) + "|r" + std::to_string(repeat_index);
    return derive_key(master_seed, "attack_cell", fnv1a64(key));
}

inline std::uint64_t model_train_seed(std::uint64_t master_seed, const std::string& model_tag,
                                      int repeat_index) {
    return derive_key(master_seed, "train_" + model_tag,
                      static_cast<std::uint64_t>(repeat_index));
}

// Runs the full (model x repeat x subgroup x alpha) grid. Cell failures are
// recorded in the report, not thrown. Output order is canonical and
// independent of the worker count.
inline MatrixResult run_matrix(const Dataset& train_set, const Dataset& val_set,
                               const std::vector<Subgroup>& subgroups,
                               const std::vector<LearnerConfig>& ladder,
                               const std::vector<double>& alphas, int repeats,
                               std::uint64_t master_seed,
                               const MatrixOptions& options = {}) {
    if (subgroups.empty() || ladder.empty() || alphas.empty() || repeats < 1)
        throw validation_error("run_matrix: empty experiment grid");
    for (double a : alphas)
        if (a < 0.0) throw validation_error("run_matrix: alphas must be nonnegative");
    for (const auto& c : ladder) c.validate();

    // Clean models, one per (model config, repeat).
    struct CleanSlot {
        TrainedModel model;
        std::uint64_t seed = 0;
        bool failed = false;
        std::string error;
    };
    const std::size_t n_models = ladder.size();
    const std::size_t n_repeats = static_cast<std::size_t>(repeats);
    std::vector<CleanSlot> clean(n_models * n_repeats);
    parallel_for(clean.size(), options.workers, [&](std::size_t idx) {
        const std::size_t m = idx / n_repeats;
        const int r = static_cast<int>(idx % n_repeats);
        CleanSlot& slot = clean[idx];
        LearnerConfig config = ladder[m];
        slot.seed = model_train_seed(master_seed, config.tag(), r);
        config.seed = slot.seed;
        try {
            slot.model = train(config, train_set);
        } catch (const std::exception& e) {
            slot.failed = true;
            slot.error = e.what();
        }
    });

    // Target masks and clean prediction counts are shared across cells.
    std::vector<std::vector<std::uint8_t>> target_mask(subgroups.size());
    for (std::size_t g = 0; g < subgroups.size(); ++g) {
        target_mask[g].assign(val_set.samples.size(), 0);
        for (std::size_t v : subgroups[g].val_member_indices) {
            if (v >= val_set.samples.size())
                throw validation_error("run_matrix: subgroup validation index out of bounds");
            target_mask[g][v] = 1;
        }
    }
    std::vector<std::vector<detail::PredCounts>> clean_counts(
        clean.size(), std::vector<detail::PredCounts>(subgroups.size()));
    parallel_for(clean.size(), options.workers, [&](std::size_t idx) {
        if (clean[idx].failed) return;
        for (std::size_t g = 0; g < subgroups.size(); ++g)
            clean_counts[idx][g] = detail::count_correct(clean[idx].model, val_set, target_mask[g]);
    });

    struct CellKey {
        std::size_t model;
        int repeat;
        std::size_t subgroup;
        std::size_t alpha;
    };
    std::vector<CellKey> keys;
    for (std::size_t m = 0; m < n_models; ++m)
        for (int r = 0; r < repeats; ++r)
            for (std::size_t g = 0; g < subgroups.size(); ++g)
                for (std::size_t a = 0; a < alphas.size(); ++a)
                    keys.push_back({m, r, g, a});

    MatrixResult result;
    result.cells.resize(keys.size());
    parallel_for(keys.size(), options.workers, [&](std::size_t idx) {
        const CellKey& key = keys[idx];
        const Subgroup& g = subgroups[key.subgroup];
        const LearnerConfig& base = ladder[key.model];
        const double alpha = alphas[key.alpha];
        const std::size_t clean_idx = key.model * n_repeats + static_cast<std::size_t>(key.repeat);
        const CleanSlot& slot = clean[clean_idx];

        DamageReport rep;
        rep.subgroup_id = g.id;
        rep.subgroup_size = g.size;
        rep.alpha = alpha;
        rep.model_tag = base.tag();
        rep.repeat_index = key.repeat;
        rep.train_seed = slot.seed;
        rep.attack_seed = cell_attack_seed(master_seed, g.id, rep.model_tag, alpha, key.repeat);
        rep.target_val_count = g.val_size;
        rep.rest_val_count = val_set.samples.size() - g.val_size;

        try {
            if (slot.failed)
                throw training_error("clean model failed: " + slot.error);
            if (g.val_size == 0)
                throw validation_error("subgroup has no validation members");
            rep.param_count = slot.model.param_count();

            rep.budget = g.member_indices.empty() ? 0 : poison_budget(alpha, g.size);
            const detail::PredCounts& cc = clean_counts[clean_idx][key.subgroup];
            rep.clean_target_correct = cc.target_correct;
            rep.clean_rest_correct = cc.rest_correct;

            detail::PredCounts pc;
            if (rep.budget == 0) {
                // No flips: identical data and seed retrain to the identical
                // model, so reuse the clean predictions outright.
                pc = cc;
            } else {
                auto [poisoned_ds, plan] = apply_label_flip(train_set, g, alpha, rep.attack_seed);
                LearnerConfig config = base;
                config.seed = slot.seed;
                const TrainedModel poisoned = train(config, poisoned_ds);
                pc = detail::count_correct(poisoned, val_set, target_mask[key.subgroup]);
                if (options.save_models && !options.model_dir.empty()) {
                    const std::string name = rep.model_tag + "_g" + std::to_string(g.id) + "_a" +
                                             format_double(alpha) + "_r" +
                                             std::to_string(key.repeat) + ".json";
                    save_model(poisoned, options.model_dir / name);
                }
            }
            rep.poisoned_target_correct = pc.target_correct;
            rep.poisoned_rest_correct = pc.rest_correct;

            const double tv = static_cast<double>(g.val_size);
            const double rv = static_cast<double>(rep.rest_val_count);
            rep.clean_target_acc = static_cast<double>(cc.target_correct) / tv;
            rep.poisoned_target_acc = static_cast<double>(pc.target_correct) / tv;
            rep.target_damage = rep.clean_target_acc - rep.poisoned_target_acc;
            if (rep.rest_val_count > 0) {
                rep.clean_rest_acc = static_cast<double>(cc.rest_correct) / rv;
                rep.poisoned_rest_acc = static_cast<double>(pc.rest_correct) / rv;
                rep.collateral_damage = rep.clean_rest_acc - rep.poisoned_rest_acc;
            }
        } catch (const std::exception& e) {
            rep.failed = true;
            rep.error = e.what();
        }
        result.cells[idx] = std::move(rep);
    });

    for (const auto& c : result.cells) result.failed_cells += c.failed;

    // Aggregate over repeats, keyed (model, subgroup, alpha) in cell order.
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::vector<const DamageReport*>>
        groups;
    for (std::size_t idx = 0; idx < keys.size(); ++idx)
        if (!result.cells[idx].failed)
            groups[{keys[idx].model, keys[idx].subgroup, keys[idx].alpha}].push_back(
                &result.cells[idx]);
    for (const auto& [key, cells] : groups) {
        AggregateReport agg;
        const DamageReport& first = *cells.front();
        agg.subgroup_id = first.subgroup_id;
        agg.subgroup_size = first.subgroup_size;
        agg.alpha = first.alpha;
        agg.model_tag = first.model_tag;
        agg.param_count = first.param_count;
        agg.repeats = cells.size();
        std::vector<double> tds, cds, cta, pta;
        for (const auto* c : cells) {
            tds.push_back(c->target_damage);
            cds.push_back(c->collateral_damage);
            cta.push_back(c->clean_target_acc);
            pta.push_back(c->poisoned_target_acc);
        }
        agg.td_mean = detail::mean_of(tds);
        agg.td_std = detail::sample_std(tds, agg.td_mean);
        agg.collateral_mean = detail::mean_of(cds);
        agg.collateral_std = detail::sample_std(cds, agg.collateral_mean);
        agg.clean_target_acc_mean = detail::mean_of(cta);
        agg.poisoned_target_acc_mean = detail::mean_of(pta);
        result.aggregates.push_back(std::move(agg));
    }

    // Across-subgroup summaries per (model, alpha).
    std::map<std::pair<std::size_t, std::size_t>, std::vector<const AggregateReport*>> by_model_alpha;
    std::map<std::string, std::size_t> tag_order;
    for (std::size_t m = 0; m < n_models; ++m) tag_order[ladder[m].tag()] = m;
    for (const auto& agg : result.aggregates) {
        std::size_t ai = 0;
        for (std::size_t a = 0; a < alphas.size(); ++a)
            if (alphas[a] == agg.alpha) ai = a;
        by_model_alpha[{tag_order[agg.model_tag], ai}].push_back(&agg);
    }
    for (const auto& [key, aggs] : by_model_alpha) {
        ModelAlphaSummary s;
        s.model_tag = aggs.front()->model_tag;
        s.param_count = aggs.front()->param_count;
        s.alpha = aggs.front()->alpha;
        s.cells = aggs.size();
        double w_total = 0.0, w_td = 0.0;
        for (const auto* a : aggs) {
            s.td_mean_unweighted += a->td_mean;
            s.collateral_mean_unweighted += a->collateral_mean;
            w_td += a->td_mean * static_cast<double>(a->subgroup_size);
            w_total += static_cast<double>(a->subgroup_size);
        }
        s.td_mean_unweighted /= static_cast<double>(aggs.size());
        s.collateral_mean_unweighted /= static_cast<double>(aggs.size());
        s.td_mean_size_weighted = w_total > 0.0 ? w_td / w_total : 0.0;
        result.summaries.push_back(std::move(s));
    }
    return result;
}

// Spearman rank correlation with average ranks for ties.
inline double spearman_rank_correlation(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw validation_error("spearman: need two equal-length series of size >= 2");
    auto ranks = [](std::span<const double> v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return v[a] < v[b];
        });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto rx = ranks(xs);
    const auto ry = ranks(ys);
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double num = 0.0, dx = 0.0, dy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        num += (rx[i] - mx) * (ry[i] - my);
        dx += (rx[i] - mx) * (rx[i] - mx);
        dy += (ry[i] - my) * (ry[i] - my);
    }
    if (dx == 0.0 || dy == 0.0) return 0.0;
    return num / std::sqrt(dx * dy);
}

inline void write_aggregate_csv(const MatrixResult& result, std::ostream& out,
                                const std::string& provenance = "") {
    if (!provenance.empty()) out << "# " << provenance << "\n";
    out << "subgroup_id,subgroup_size,alpha,model_tag,param_count,repeats,td_mean,td_std,"
           "collateral_mean,collateral_std,clean_target_acc_mean,poisoned_target_acc_mean\n";
    for (const auto& a : result.aggregates)
        out << a.subgroup_id << "," << a.subgroup_size << "," << format_double(a.alpha) << ","
            << a.model_tag << "," << a.param_count << "," << a.repeats << ","
            << format_double(a.td_mean) << "," << format_double(a.td_std) << ","
            << format_double(a.collateral_mean) << "," << format_double(a.collateral_std) << ","
            << format_double(a.clean_target_acc_mean) << ","
            << format_double(a.poisoned_target_acc_mean) << "\n";
}

inline void write_summary_csv(const MatrixResult& result, std::ostream& out,
                              const std::string& provenance = "") {
    if (!provenance.empty()) out << "# " << provenance << "\n";
    out << "model_tag,param_count,alpha,subgroups,td_mean_unweighted,td_mean_size_weighted,"
           "collateral_mean_unweighted\n";
    for (const auto& s : result.summaries)
        out << s.model_tag << "," << s.param_count << "," << format_double(s.alpha) << ","
            << s.cells << "," << format_double(s.td_mean_unweighted) << ","
            << format_double(s.td_mean_size_weighted) << ","
            << format_double(s.collateral_mean_unweighted) << "\n";
}

inline nlohmann::json damage_report_to_json(const DamageReport& r) {
    nlohmann::json j{{"subgroup_id", r.subgroup_id},
                     {"subgroup_size", r.subgroup_size},
                     {"alpha", r.alpha},
                     {"model_tag", r.model_tag},
                     {"param_count", r.param_count},
                     {"repeat", r.repeat_index},
                     {"train_seed", r.train_seed},
                     {"attack_seed", r.attack_seed},
                     {"budget", r.budget},
                     {"target_val_count", r.target_val_count},
                     {"rest_val_count", r.rest_val_count}};
    if (r.failed) {
        j["failed"] = true;
        j["error"] = r.error;
    } else {
        j["clean_target_acc"] = r.clean_target_acc;
        j["poisoned_target_acc"] = r.poisoned_target_acc;
        j["target_damage"] = r.target_damage;
        j["clean_rest_acc"] = r.clean_rest_acc;
        j["poisoned_rest_acc"] = r.poisoned_rest_acc;
        j["collateral_damage"] = r.collateral_damage;
        j["clean_target_correct"] = r.clean_target_correct;
        j["poisoned_target_correct"] = r.poisoned_target_correct;
        j["clean_rest_correct"] = r.clean_rest_correct;
        j["poisoned_rest_correct"] = r.poisoned_rest_correct;
    }
    return j;
}

inline void write_cells_jsonl(const MatrixResult& result, std::ostream& out) {
    for (const auto& c : result.cells) out << damage_report_to_json(c).dump() << "\n";
}

}  // namespace poisonlab
