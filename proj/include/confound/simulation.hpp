#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "confound/dataset.hpp"
#include "confound/learners.hpp"
#include "confound/matrix.hpp"
#include "confound/rng.hpp"

namespace confound {

// Synthetic data model: binary confounder C and label Y drawn jointly from a
// 2x2 probability table, features X_j = beta_y * Y + beta_c * C + N(0, 1).
struct SimScenario {
    std::string name = "scenario";
    std::array<std::array<double, 2>, 2> joint = {{{0.25, 0.25}, {0.25, 0.25}}};  // [c][y]
    std::size_t n_samples = 600;
    std::size_t feature_count = 10;
    double beta_y = 0.0;
    double beta_c = 0.0;
    double test_fraction = 0.25;

    void validate() const;
};

struct BernoulliDraw {
    std::vector<int> c;
    std::vector<int> y;
};

BernoulliDraw sample_bivariate_bernoulli(const std::array<std::array<double, 2>, 2>& joint,
                                         std::size_t n, Rng& rng);

Matrix generate_features(std::span<const int> c, std::span<const int> y,
                         const SimScenario& scenario, Rng& rng);

// Draws (C, Y), generates features and assembles the Dataset.
Dataset simulate_dataset(const SimScenario& scenario, std::uint64_t seed);

struct ExperimentOptions {
    int replicates = 200;
    int permutations = 300;  // b per replicate
    std::uint64_t seed = 0;
    int threads = 1;
    LearnerSpec learner;
};

// One confounding-test p-value per replicate: simulate, split, build the
// restricted AUC null, apply the analytic confounding test.
std::vector<double> run_confounding_pvalues(const SimScenario& scenario,
                                            const ExperimentOptions& opts);

struct PowerCurve {
    std::string scenario;
    std::vector<double> alphas;
    std::vector<double> power;  // rejection proportion per alpha
    int replicates = 0;
};

std::vector<double> default_alpha_grid();  // 0 to 0.15 in 31 steps

std::vector<PowerCurve> run_power_experiment(std::span<const SimScenario> scenarios,
                                             const ExperimentOptions& opts,
                                             std::span<const double> alphas);

// Type-I-error study; the scenario must carry no confounding signal
// (beta_c == 0). Returns the raw p-values.
std::vector<double> run_type1_experiment(const SimScenario& scenario,
                                         const ExperimentOptions& opts);

PowerCurve power_from_pvalues(const std::string& name, std::span<const double> pvalues,
                              std::span<const double> alphas);

}  // namespace confound
