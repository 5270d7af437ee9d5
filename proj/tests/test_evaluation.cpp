#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "poisonlab/evaluation.hpp"
#include "poisonlab/mixture.hpp"
#include "poisonlab/subgroups.hpp"

using namespace poisonlab;

namespace {

TrainedModel oracle_with_table(std::map<int, int> table) {
    TrainedModel m;
    m.family = LearnerFamily::zero_local_oracle;
    m.feature_dim = 1;
    m.oracle_table = std::move(table);
    return m;
}

struct Pipeline {
    Dataset train;
    Dataset val;
    std::vector<Subgroup> subgroups;
};

// Mixture with deterministic labels (p alternating 0/1) split into train/val.
Pipeline oracle_pipeline(int k, std::size_t n_train, std::size_t n_val, std::uint64_t seed) {
    MixtureSpec spec;
    spec.k = k;
    for (int i = 0; i < k; ++i) {
        spec.weights.push_back(1.0 / k);
        spec.label_probs.push_back(i % 2 == 0 ? 1.0 : 0.0);
        spec.components.push_back(
            {i, {2.5 * i, 0.0}, {0.5, 0.5}, spec.label_probs.back()});
    }
    Pipeline p;
    p.train = with_subpop_annotations(sample_dataset(spec, n_train, seed), k);
    p.val = with_subpop_annotations(sample_dataset(spec, n_val, seed + 1), k);
    AnnotationSchema schema{subpop_annotation_names(k), subpop_annotation_names(k)};
    p.subgroups = derive_subgroups(p.train, schema, 1, 1, p.val);
    return p;
}

std::vector<Sample> one_sample_per_subpop(const std::vector<int>& labels) {
    std::vector<Sample> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        Sample s;
        s.features = {0.0};
        s.label = labels[i];
        s.subpop_id = static_cast<int>(i);
        out.push_back(std::move(s));
    }
    return out;
}

LearnerConfig quick_mlp(std::vector<int> hidden) {
    LearnerConfig c;
    c.family = LearnerFamily::mlp;
    c.hidden_layers = std::move(hidden);
    c.epochs = 10;
    c.batch_size = 16;
    c.learning_rate = 0.3;
    return c;
}

}  // namespace

TEST_CASE("target damage is clean accuracy minus poisoned accuracy") {
    // Ten samples, one per subpopulation; the clean oracle answers 9 of them
    // correctly (0.9), the poisoned one 3 (0.3), so td = 0.6 exactly.
    const std::vector<int> labels{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
    std::map<int, int> clean_table, poisoned_table;
    for (int i = 0; i < 10; ++i) clean_table[i] = labels[static_cast<std::size_t>(i)];
    clean_table[9] = 1;  // one mistake
    for (int i = 0; i < 10; ++i) poisoned_table[i] = 1 - labels[static_cast<std::size_t>(i)];
    poisoned_table[0] = labels[0];
    poisoned_table[1] = labels[1];
    poisoned_table[2] = labels[2];

    const auto clean = oracle_with_table(clean_table);
    const auto poisoned = oracle_with_table(poisoned_table);
    const auto val = one_sample_per_subpop(labels);
    CHECK(accuracy(clean, val) == 0.9);
    CHECK(accuracy(poisoned, val) == 0.3);
    CHECK(target_damage(clean, poisoned, val) == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("identical models give zero damage") {
    const auto model = oracle_with_table({{0, 1}, {1, 0}});
    const auto val = one_sample_per_subpop({1, 0});
    CHECK(target_damage(model, model, val) == 0.0);
    CHECK(collateral_damage(model, model, val) == 0.0);
}

TEST_CASE("empty validation sets are rejected") {
    const auto model = oracle_with_table({{0, 1}});
    CHECK_THROWS_AS(target_damage(model, model, {}), validation_error);
    CHECK_THROWS_AS(collateral_damage(model, model, {}), validation_error);
}

TEST_CASE("oracle pipeline: deterministic subpopulation reaches td exactly 1") {
    auto p = oracle_pipeline(3, 600, 300, 21);
    LearnerConfig oracle;
    oracle.family = LearnerFamily::zero_local_oracle;
    const TrainedModel clean = train(oracle, p.train);

    // Attack the subgroup whose pattern marks subpopulation 0 (p_i = 1).
    const Subgroup* target = nullptr;
    for (const auto& g : p.subgroups)
        if (p.train.samples[g.member_indices.front()].subpop_id == 0) target = &g;
    REQUIRE(target != nullptr);

    const auto [poisoned_ds, plan] = apply_label_flip(p.train, *target, 2.0, 5);
    const TrainedModel poisoned = train(oracle, poisoned_ds);

    std::vector<Sample> val_target, val_rest;
    for (const auto& s : p.val.samples)
        (s.subpop_id == 0 ? val_target : val_rest).push_back(s);

    CHECK(target_damage(clean, poisoned, val_target) == 1.0);
    CHECK(collateral_damage(clean, poisoned, val_rest) == 0.0);
}

TEST_CASE("poisoning one subpopulation never touches the oracle elsewhere") {
    auto p = oracle_pipeline(5, 800, 400, 33);
    LearnerConfig oracle;
    oracle.family = LearnerFamily::zero_local_oracle;
    const TrainedModel clean = train(oracle, p.train);
    for (const auto& g : p.subgroups) {
        const auto [poisoned_ds, plan] = apply_label_flip(p.train, g, 2.0, 77);
        const TrainedModel poisoned = train(oracle, poisoned_ds);
        std::vector<Sample> val_rest;
        const int attacked_subpop = p.train.samples[g.member_indices.front()].subpop_id;
        for (const auto& s : p.val.samples)
            if (s.subpop_id != attacked_subpop) val_rest.push_back(s);
        CHECK(collateral_damage(clean, poisoned, val_rest) == 0.0);
    }
}

TEST_CASE("run_matrix emits one report per grid cell") {
    auto p = oracle_pipeline(5, 500, 250, 9);
    REQUIRE(p.subgroups.size() == 5);
    std::vector<LearnerConfig> ladder{quick_mlp({4}), quick_mlp({8})};
    LearnerConfig logreg;
    logreg.family = LearnerFamily::logistic_regression;
    logreg.epochs = 10;
    ladder.push_back(logreg);

    const auto result = run_matrix(p.train, p.val, p.subgroups, ladder, {0.0, 2.0}, 1, 1234);
    CHECK(result.cells.size() == 3 * 5 * 2);
    CHECK(result.failed_cells == 0);
    CHECK(result.aggregates.size() == 3 * 5 * 2);
}

TEST_CASE("alpha zero cells have exactly zero damage") {
    auto p = oracle_pipeline(3, 300, 150, 10);
    const auto result =
        run_matrix(p.train, p.val, p.subgroups, {quick_mlp({4})}, {0.0}, 2, 555);
    for (const auto& c : result.cells) {
        REQUIRE_FALSE(c.failed);
        CHECK(c.target_damage == 0.0);
        CHECK(c.collateral_damage == 0.0);
        CHECK(c.budget == 0);
    }
}

TEST_CASE("matrix results are identical across worker counts") {
    auto p = oracle_pipeline(4, 400, 200, 11);
    std::vector<LearnerConfig> ladder{quick_mlp({4}), quick_mlp({6})};
    MatrixOptions serial;
    serial.workers = 1;
    MatrixOptions parallel;
    parallel.workers = 4;
    const auto a = run_matrix(p.train, p.val, p.subgroups, ladder, {1.0, 2.0}, 2, 99, serial);
    const auto b = run_matrix(p.train, p.val, p.subgroups, ladder, {1.0, 2.0}, 2, 99, parallel);
    REQUIRE(a.cells.size() == b.cells.size());
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        CHECK(a.cells[i].target_damage == b.cells[i].target_damage);
        CHECK(a.cells[i].collateral_damage == b.cells[i].collateral_damage);
        CHECK(a.cells[i].attack_seed == b.cells[i].attack_seed);
    }
}

TEST_CASE("failing cells are recorded without aborting the matrix") {
    auto p = oracle_pipeline(3, 300, 150, 12);
    LearnerConfig diverging = quick_mlp({4});
    diverging.learning_rate = 1e18;
    diverging.epochs = 8;
    const auto result =
        run_matrix(p.train, p.val, p.subgroups, {diverging, quick_mlp({4})}, {2.0}, 1, 3);
    CHECK(result.failed_cells == p.subgroups.size());
    std::size_t ok = 0;
    for (const auto& c : result.cells) {
        if (c.failed) {
            CHECK(!c.error.empty());
        } else {
            ++ok;
        }
    }
    CHECK(ok == p.subgroups.size());
}

TEST_CASE("damage report invariants hold on every cell") {
    auto p = oracle_pipeline(4, 400, 200, 13);
    const auto result =
        run_matrix(p.train, p.val, p.subgroups, {quick_mlp({6})}, {0.0, 1.0, 2.0}, 2, 77);
    for (const auto& c : result.cells) {
        REQUIRE_FALSE(c.failed);
        CHECK(c.target_damage == c.clean_target_acc - c.poisoned_target_acc);
        CHECK(c.collateral_damage == c.clean_rest_acc - c.poisoned_rest_acc);
        CHECK(c.target_damage >= -1.0);
        CHECK(c.target_damage <= 1.0);
        CHECK(c.collateral_damage >= -1.0);
        CHECK(c.collateral_damage <= 1.0);
        CHECK(c.budget == (c.alpha == 0.0 ? 0 : poison_budget(c.alpha, c.subgroup_size)));
    }
}

TEST_CASE("save_models writes one file per poisoned cell") {
    auto p = oracle_pipeline(3, 300, 150, 14);
    MatrixOptions options;
    options.save_models = true;
    options.model_dir = std::filesystem::temp_directory_path() / "poisonlab_cell_models";
    std::filesystem::remove_all(options.model_dir);
    const auto result =
        run_matrix(p.train, p.val, p.subgroups, {quick_mlp({4})}, {0.0, 2.0}, 1, 8, options);
    REQUIRE(result.failed_cells == 0);
    std::size_t files = 0;
    for (const auto& entry : std::filesystem::directory_iterator(options.model_dir)) {
        const TrainedModel model = load_model(entry.path());
        CHECK(model.param_count() > 0);
        ++files;
    }
    // alpha=0 cells reuse the clean model and write nothing
    CHECK(files == p.subgroups.size());
    std::filesystem::remove_all(options.model_dir);
}

TEST_CASE("spearman rank correlation on known orderings") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    const std::vector<double> inc{2, 4, 5, 8, 9};
    const std::vector<double> dec{9, 8, 5, 4, 2};
    CHECK(spearman_rank_correlation(x, inc) == doctest::Approx(1.0));
    CHECK(spearman_rank_correlation(x, dec) == doctest::Approx(-1.0));
    const std::vector<double> mixed{3, 1, 4, 1, 5};
    const double rho = spearman_rank_correlation(x, mixed);
    CHECK(rho > -1.0);
    CHECK(rho < 1.0);
    CHECK_THROWS_AS(spearman_rank_correlation(x, std::vector<double>{1.0}), validation_error);
}
