#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "confound/dataset.hpp"
#include "confound/learners.hpp"
#include "confound/metrics.hpp"
#include "confound/rng.hpp"

namespace confound {

enum class NullScheme { restricted, standard, baseline };

const char* scheme_name(NullScheme scheme);

struct NullDistribution {
    std::vector<double> samples;
    NullScheme scheme = NullScheme::restricted;
    MetricKind metric = MetricKind::auc;

    int count() const { return static_cast<int>(samples.size()); }
};

struct NullSummary {
    double mean = 0.0;
    double sd = 0.0;
    int count = 0;
};

// Shuffles y within each confounder level (independent Fisher-Yates per
// stratum), leaving every stratum's label multiset unchanged.
std::vector<int> restricted_shuffle(std::span<const int> y, std::span<const int> levels, Rng& rng);

std::vector<int> standard_shuffle(std::span<const int> y, Rng& rng);

struct PermutationOptions {
    int iterations = 1000;  // b
    std::uint64_t seed = 0;
    int threads = 1;
};

// Monte Carlo permutation null: per iteration, shuffle train and test labels
// (independently, per scheme), retrain the learner on the shuffled training
// labels, score the test set and record the metric against the shuffled test
// labels. Iteration i draws everything from derive_seed(seed, i), so the
// samples vector is identical for any thread count.
NullDistribution permutation_null(const LearnerSpec& learner, const Dataset& ds,
                                  const SplitIndices& split, MetricKind metric, NullScheme scheme,
                                  const PermutationOptions& opts);

NullSummary summarize(const NullDistribution& nd);

// Trains on the unpermuted data and returns the observed metric.
double evaluate_observed(const LearnerSpec& learner, const Dataset& ds, const SplitIndices& split,
                         MetricKind metric, LearnerModel* fitted = nullptr);

// One metric sample per line.
void write_samples_tsv(const NullDistribution& nd, const std::string& path);

}  // namespace confound
