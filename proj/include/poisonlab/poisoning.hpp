#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include <json.hpp>

#include "poisonlab/errors.hpp"
#include "poisonlab/mixture.hpp"
#include "poisonlab/rng.hpp"
#include "poisonlab/subgroups.hpp"

// Label-flipping subpopulation poisoning. The adversary inverts the labels of
// a seeded uniform subset S_p of the target subgroup's training members with
// |S_p| = floor(alpha * n_p / (1 + alpha)). Features and annotations are
// never touched.

namespace poisonlab {

struct PoisonPlan {
    int subgroup_id = 0;
    double alpha = 0.0;
    std::size_t budget = 0;                    // n_hat_p
    std::vector<std::size_t> flipped_indices;  // S_p, sorted
    std::uint64_t seed = 0;
};

// floor(alpha * n_p / (1 + alpha)); strictly less than n_p for finite alpha.
// The 1e-9 nudge keeps exact integer ratios (e.g. alpha=2, n_p=300) from
// landing one ulp below the integer.
inline std::size_t poison_budget(double alpha, std::size_t n_p) {
    if (alpha < 0.0) throw validation_error("poison_budget: alpha must be >= 0");
    if (n_p == 0) throw validation_error("poison_budget: n_p must be positive");
    double raw = alpha * static_cast<double>(n_p) / (1.0 + alpha);
    auto b = static_cast<std::size_t>(std::floor(raw + 1e-9));
    return std::min(b, n_p - 1);
}

inline std::pair<Dataset, PoisonPlan> apply_label_flip(const Dataset& dataset,
                                                       const Subgroup& subgroup,
                                                       double alpha,
                                                       std::uint64_t seed) {
    if (alpha < 0.0) throw validation_error("apply_label_flip: alpha must be >= 0");
    for (std::size_t idx : subgroup.member_indices)
        if (idx >= dataset.samples.size())
            throw validation_error("apply_label_flip: subgroup index out of dataset bounds");

    PoisonPlan plan;
    plan.subgroup_id = subgroup.id;
    plan.alpha = alpha;
    plan.seed = seed;
    plan.budget = subgroup.member_indices.empty()
                      ? 0
                      : poison_budget(alpha, subgroup.member_indices.size());

    RngStream rng(seed, "apply_label_flip");
    auto chosen = rng.sample_without_replacement(subgroup.member_indices.size(), plan.budget);
    plan.flipped_indices.reserve(plan.budget);
    for (std::size_t c : chosen) plan.flipped_indices.push_back(subgroup.member_indices[c]);
    std::sort(plan.flipped_indices.begin(), plan.flipped_indices.end());

    Dataset poisoned = dataset;
    for (std::size_t idx : plan.flipped_indices)
        poisoned.samples[idx].label = 1 - poisoned.samples[idx].label;
    return {std::move(poisoned), std::move(plan)};
}

inline nlohmann::json poison_plan_to_json(const PoisonPlan& plan) {
    return {{"subgroup_id", plan.subgroup_id},
            {"alpha", plan.alpha},
            {"budget", plan.budget},
            {"seed", plan.seed},
            {"flipped_indices", plan.flipped_indices}};
}

inline PoisonPlan poison_plan_from_json(const nlohmann::json& j) {
    PoisonPlan plan;
    plan.subgroup_id = j.at("subgroup_id").get<int>();
    plan.alpha = j.at("alpha").get<double>();
    plan.budget = j.at("budget").get<std::size_t>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.flipped_indices = j.at("flipped_indices").get<std::vector<std::size_t>>();
    return plan;
}

}  // namespace poisonlab
