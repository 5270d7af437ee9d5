// Generates the bundled Adult-like tabular dataset: census-style columns, a
// binary income label, and a long-tailed family of (ethnicity, gender,
// education) subgroups with subgroup-specific label rates. Deterministic for
// a given seed; the checked-in data/adult_like.csv is this tool's output at
// the defaults.

#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "poisonlab/io.hpp"
#include "poisonlab/rng.hpp"

namespace {

constexpr const char* kEthnicities[] = {"GroupA", "GroupB", "GroupC", "GroupD", "GroupE"};
constexpr double kEthnicityWeights[] = {0.55, 0.20, 0.12, 0.08, 0.05};

constexpr const char* kGenders[] = {"Female", "Male"};
constexpr double kGenderWeights[] = {0.48, 0.52};

constexpr const char* kEducations[] = {"Elementary", "Middle",  "HS-grad",   "Trade",
                                       "Some-college", "Bachelors", "Masters", "Doctorate"};
constexpr double kEducationWeights[] = {0.04, 0.07, 0.30, 0.09, 0.23, 0.18, 0.07, 0.02};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"generate the Adult-like synthetic tabular dataset"};
    std::string out_path = "data/adult_like.csv";
    std::uint64_t seed = 20240501;
    std::size_t rows = 9000;
    app.add_option("--out", out_path, "output CSV path");
    app.add_option("--seed", seed, "generator seed");
    app.add_option("--rows", rows, "row count");
    CLI11_PARSE(app, argc, argv);

    using poisonlab::RngStream;
    poisonlab::CategoricalSampler eth_pick({std::begin(kEthnicityWeights), std::end(kEthnicityWeights)});
    poisonlab::CategoricalSampler gen_pick({std::begin(kGenderWeights), std::end(kGenderWeights)});
    poisonlab::CategoricalSampler edu_pick({std::begin(kEducationWeights), std::end(kEducationWeights)});

    RngStream rows_rng(seed, "adult_like_rows");

    auto out = poisonlab::open_output(out_path);
    out << "age,hours_per_week,ethnicity,gender,education,income\n";
    for (std::size_t r = 0; r < rows; ++r) {
        const int e = eth_pick.draw(rows_rng);
        const int g = gen_pick.draw(rows_rng);
        const int d = edu_pick.draw(rows_rng);

        // Bucket-level parameters come from streams keyed by the bucket name,
        // so they do not depend on row count or draw order.
        const std::string bucket = std::string(kEthnicities[e]) + "|" + kGenders[g] + "|" +
                                   kEducations[d];
        RngStream bucket_rng(seed, "adult_like_bucket_" + bucket);
        const double base_logit = 1.6 * bucket_rng.normal();
        const double age_mu = 38.0 + 6.0 * bucket_rng.normal();
        const double hours_mu = 41.0 + 4.0 * bucket_rng.normal();

        const double age = std::max(17.0, age_mu + 9.0 * rows_rng.normal());
        const double hours = std::min(90.0, std::max(5.0, hours_mu + 8.0 * rows_rng.normal()));

        const double p = sigmoid(base_logit + 0.05 * (age - 40.0) + 0.04 * (hours - 40.0));
        const bool high_income = rows_rng.bernoulli(p);

        out << static_cast<int>(age) << "," << static_cast<int>(hours) << ","
            << kEthnicities[e] << "," << kGenders[g] << "," << kEducations[d] << ","
            << (high_income ? ">50K" : "<=50K") << "\n";
    }
    std::cerr << "wrote " << rows << " rows to " << out_path << "\n";
    return 0;
}
