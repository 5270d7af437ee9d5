#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "poisonlab/errors.hpp"
#include "poisonlab/io.hpp"
#include "poisonlab/learners.hpp"
#include "poisonlab/mixture.hpp"
#include "poisonlab/poisoning.hpp"
#include "poisonlab/rng.hpp"
#include "poisonlab/subgroups.hpp"

// Monte-Carlo verification of the 0-local attack guarantee, and estimation of
// how locally a trained learner behaves (total-variation distance between its
// prediction distribution at a point and over the point's subpopulation).
//
// The guarantee under test: against a completely locally dependent learner, a
// label-flipping attack of size 2 * gamma_i * n on subpopulation i succeeds
// with probability at least 1 - exp(-9 * gamma_i * n / 5). The failure mode
// is the tail event |D_i| > 4 * gamma_i * n, whose probability the
// multiplicative Chernoff bound (delta = 3) caps at the same exponential.

namespace poisonlab {

// 1 - exp(-9 * gamma * n / 5): the analytic lower bound on attack success.
inline double chernoff_success_bound(double gamma, std::size_t n) {
    if (gamma <= 0.0 || gamma > 1.0)
        throw validation_error("chernoff_success_bound: gamma must be in (0, 1]");
    if (n == 0) throw validation_error("chernoff_success_bound: n must be positive");
    return 1.0 - std::exp(-9.0 * gamma * static_cast<double>(n) / 5.0);
}

struct TheoremTrialResult {
    std::uint64_t trial_seed = 0;
    std::size_t subpop_size = 0;   // realized |D_i|
    std::size_t attack_size = 0;   // min(round(2 gamma_i n), |D_i|)
    bool majority_flipped = false; // post-attack majority differs from clean majority
    bool misclassified = false;    // poisoned oracle disagrees with clean majority
};

struct TheoremSimResult {
    double success_rate = 0.0;
    double bound = 0.0;
    double std_error = 0.0;  // sqrt(rate * (1 - rate) / trials)
    std::vector<TheoremTrialResult> trials;
};

// Per trial: sample a dataset of size n, flip min(round(2 gamma_i n), |D_i|)
// labels in subpopulation i (majority-labeled samples first, the strongest
// flip set), retrain the 0-local oracle, and draw one fresh sample from the
// subpopulation; the trial succeeds if the oracle's prediction for it differs
// from the subpopulation's clean-data majority label. attack_size_override
// >= 0 replaces the theorem's attack size (0 disables the attack entirely).
inline TheoremSimResult simulate_theorem1(const MixtureSpec& spec, std::size_t n,
                                          int target_subpop, std::size_t trials,
                                          std::uint64_t seed,
                                          long long attack_size_override = -1) {
    spec.validate();
    if (target_subpop < 0 || target_subpop >= spec.k)
        throw validation_error("simulate_theorem1: target_subpop out of range");
    if (trials < 1) throw validation_error("simulate_theorem1: trials must be >= 1");

    const double gamma = spec.weights[static_cast<std::size_t>(target_subpop)];
    TheoremSimResult result;
    result.bound = chernoff_success_bound(gamma, n);
    result.trials.reserve(trials);

    std::size_t successes = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        TheoremTrialResult trial;
        trial.trial_seed = derive_key(seed, "theorem_trial", t);
        Dataset ds = sample_dataset(spec, n, trial.trial_seed);

        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < ds.samples.size(); ++i)
            if (ds.samples[i].subpop_id == target_subpop) members.push_back(i);
        trial.subpop_size = members.size();

        if (members.empty()) {
            // Unrealized subpopulation: nothing to misclassify, counts as failure.
            result.trials.push_back(trial);
            continue;
        }

        std::size_t ones = 0;
        for (std::size_t i : members) ones += static_cast<std::size_t>(ds.samples[i].label);
        const int clean_majority = (2 * ones >= members.size()) ? 1 : 0;

        const std::size_t theorem_size = static_cast<std::size_t>(
            std::llround(2.0 * gamma * static_cast<double>(n)));
        trial.attack_size =
            attack_size_override >= 0
                ? std::min(static_cast<std::size_t>(attack_size_override), members.size())
                : std::min(theorem_size, members.size());

        // Flip majority-labeled members first.
        std::vector<std::size_t> flip_order;
        flip_order.reserve(members.size());
        for (std::size_t i : members)
            if (ds.samples[i].label == clean_majority) flip_order.push_back(i);
        for (std::size_t i : members)
            if (ds.samples[i].label != clean_majority) flip_order.push_back(i);
        for (std::size_t f = 0; f < trial.attack_size; ++f)
            ds.samples[flip_order[f]].label ^= 1;

        std::size_t ones_after = 0;
        for (std::size_t i : members) ones_after += static_cast<std::size_t>(ds.samples[i].label);
        const int poisoned_majority = (2 * ones_after >= members.size()) ? 1 : 0;
        trial.majority_flipped = poisoned_majority != clean_majority;

        LearnerConfig oracle_config;
        oracle_config.family = LearnerFamily::zero_local_oracle;
        oracle_config.seed = trial.trial_seed;
        const TrainedModel oracle = train(oracle_config, ds);

        RngStream fresh_rng(trial.trial_seed, "theorem_fresh_sample");
        const auto& comp = spec.components[static_cast<std::size_t>(target_subpop)];
        std::vector<double> fresh(comp.mean.size());
        for (std::size_t j = 0; j < fresh.size(); ++j)
            fresh[j] = fresh_rng.normal(comp.mean[j], comp.stddev[j]);
        const int prediction = predict(oracle, fresh, target_subpop);
        trial.misclassified = prediction != clean_majority;

        if (trial.misclassified) ++successes;
        result.trials.push_back(trial);
    }

    result.success_rate = static_cast<double>(successes) / static_cast<double>(trials);
    result.std_error = std::sqrt(result.success_rate * (1.0 - result.success_rate) /
                                 static_cast<double>(trials));
    return result;
}

struct DeltaEstimate {
    int subgroup_id = 0;
    std::size_t probe_count = 0;
    double delta_max = 0.0;             // max over probe points of |p_x - q|
    double delta_mean = 0.0;
    double point_distribution = 0.0;    // p_x at the maximizing probe
    double subpop_distribution = 0.0;   // q, ensemble x subpopulation average
    std::size_t ensemble_size = 0;
};

// Measures, per subgroup, the total-variation distance between the ensemble
// prediction distribution at each probe point and the ensemble-and-
// subpopulation prediction distribution over the subgroup's validation
// members. For Bernoulli outputs TV reduces to |p - q|. Probe points default
// to all validation members; max_probes > 0 subsamples them (seeded).
inline std::vector<DeltaEstimate> estimate_delta_for_ensemble(
    const std::vector<TrainedModel>& ensemble, const std::vector<Subgroup>& subgroups,
    const Dataset& val_dataset, std::uint64_t seed, std::size_t max_probes = 0) {
    const std::size_t ensemble_size = ensemble.size();
    if (ensemble_size < 1) throw validation_error("estimate_delta: empty ensemble");
    for (const auto& g : subgroups)
        if (g.val_member_indices.empty())
            throw validation_error("estimate_delta: subgroup " + std::to_string(g.id) +
                                   " has no validation members to probe");

    std::vector<DeltaEstimate> out;
    out.reserve(subgroups.size());
    for (const auto& g : subgroups) {
        std::vector<std::size_t> probes = g.val_member_indices;
        if (max_probes > 0 && probes.size() > max_probes) {
            RngStream probe_rng(seed, "delta_probes", static_cast<std::uint64_t>(g.id));
            auto chosen = probe_rng.sample_without_replacement(probes.size(), max_probes);
            std::sort(chosen.begin(), chosen.end());
            std::vector<std::size_t> sub;
            sub.reserve(max_probes);
            for (std::size_t c : chosen) sub.push_back(probes[c]);
            probes = std::move(sub);
        }

        // One pass over the ensemble x member prediction matrix.
        std::vector<double> point_mean(probes.size(), 0.0);
        double subpop_sum = 0.0;
        for (const auto& model : ensemble) {
            for (std::size_t v : g.val_member_indices) {
                const Sample& s = val_dataset.samples[v];
                subpop_sum += predict(model, s.features, s.subpop_id);
            }
            for (std::size_t p = 0; p < probes.size(); ++p) {
                const Sample& s = val_dataset.samples[probes[p]];
                point_mean[p] += predict(model, s.features, s.subpop_id);
            }
        }
        const double q = subpop_sum / (static_cast<double>(ensemble_size) *
                                       static_cast<double>(g.val_member_indices.size()));

        DeltaEstimate est;
        est.subgroup_id = g.id;
        est.probe_count = probes.size();
        est.ensemble_size = ensemble_size;
        est.subpop_distribution = q;
        double sum_delta = 0.0;
        for (std::size_t p = 0; p < probes.size(); ++p) {
            const double px = point_mean[p] / static_cast<double>(ensemble_size);
            const double d = std::abs(px - q);
            sum_delta += d;
            if (d >= est.delta_max) {
                est.delta_max = d;
                est.point_distribution = px;
            }
        }
        est.delta_mean = probes.empty() ? 0.0 : sum_delta / static_cast<double>(probes.size());
        out.push_back(est);
    }
    return out;
}

// Trains ensemble_size models on the same dataset with distinct seeds
// (initialization and batch order vary; the data does not) and estimates
// delta. For the 0-local oracle the ensemble is degenerate: every member is
// identical, and the estimate comes straight from the oracle table.
inline std::vector<DeltaEstimate> estimate_delta(const LearnerConfig& config,
                                                 const Dataset& dataset,
                                                 const std::vector<Subgroup>& subgroups,
                                                 const Dataset& val_dataset,
                                                 std::size_t ensemble_size,
                                                 std::uint64_t seed,
                                                 std::size_t max_probes = 0) {
    if (ensemble_size < 2) throw validation_error("estimate_delta: ensemble_size must be >= 2");
    std::vector<TrainedModel> ensemble;
    ensemble.reserve(ensemble_size);
    for (std::size_t r = 0; r < ensemble_size; ++r) {
        LearnerConfig member = config;
        member.seed = derive_key(seed, "delta_ensemble", r);
        ensemble.push_back(train(member, dataset));
    }
    return estimate_delta_for_ensemble(ensemble, subgroups, val_dataset, seed, max_probes);
}

inline void write_trial_log_csv(const TheoremSimResult& result, std::ostream& out,
                                const std::string& provenance = "") {
    if (!provenance.empty()) out << "# " << provenance << "\n";
    out << "trial,subpop_size,attack_size,majority_flipped,misclassified\n";
    for (std::size_t t = 0; t < result.trials.size(); ++t) {
        const auto& trial = result.trials[t];
        out << t << "," << trial.subpop_size << "," << trial.attack_size << ","
            << (trial.majority_flipped ? 1 : 0) << "," << (trial.misclassified ? 1 : 0) << "\n";
    }
}

inline void write_delta_csv(const std::vector<DeltaEstimate>& estimates, std::ostream& out,
                            const std::string& model_tag,
                            const std::string& provenance = "") {
    if (!provenance.empty()) out << "# " << provenance << "\n";
    out << "model_tag,subgroup_id,probe_count,delta_max,delta_mean\n";
    for (const auto& e : estimates)
        out << model_tag << "," << e.subgroup_id << "," << e.probe_count << ","
            << format_double(e.delta_max) << "," << format_double(e.delta_mean) << "\n";
}

}  // namespace poisonlab
