#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "confound/dataset.hpp"
#include "confound/learners.hpp"

namespace confound {

struct PropensityScores {
    std::vector<double> scores;  // P(label = 1 | confounder), clipped inside (0,1)
    LearnerModel model;

    static constexpr double kDefaultClip = 1e-3;
    static PropensityScores from_scores(std::vector<double> raw, double clip = kDefaultClip);
};

struct BalanceRow {
    std::string level;
    double negatives = 0.0;  // weight mass (plain counts when weights are all 1)
    double positives = 0.0;
    double case_fraction = 0.0;
};

struct BalanceTable {
    std::vector<BalanceRow> rows;

    double total() const;
    // Largest absolute deviation of a per-level case fraction from the
    // overall case fraction.
    double max_imbalance() const;
    void write(std::ostream& out) const;
};

// 1:1 exact matching inside each confounder level: the majority class is
// subsampled down to the minority count; levels missing a class are dropped.
// Returns the sorted retained row indices.
std::vector<std::size_t> match_exact(const Dataset& ds, std::uint64_t seed);

// Saturated logistic regression of the label on confounder level indicators.
PropensityScores estimate_propensity(const Levels& confounder, std::span<const int> labels,
                                     const LogisticConfig& cfg = {});

// Logistic regression of the label on a single raw covariate. This is the
// paper-style modeling shortcut: when the true label/covariate relationship
// is not logistic-linear the scores are misspecified and IPW balances only
// partially.
PropensityScores estimate_propensity_linear(std::span<const double> covariate,
                                            std::span<const int> labels,
                                            const LogisticConfig& cfg = {});

enum class IpwMode { weights, resample };

IpwMode parse_ipw_mode(const std::string& name);

// Inverse-probability weights for every row: 1/ps_i for cases, 1/(1-ps_i)
// for controls, multiplied into any existing weights and normalized to mean 1.
std::vector<double> ipw_weights(const Dataset& ds, const PropensityScores& ps);

// Row indices of a weighted resample with replacement (probability
// proportional to the IPW weight). resample_size 0 keeps the original size.
std::vector<std::size_t> ipw_resample_rows(const Dataset& ds, const PropensityScores& ps,
                                           std::uint64_t seed, std::size_t resample_size = 0);

// Inverse probability weighting: `weights` attaches the normalized weights
// (mean 1); `resample` draws rows with replacement proportionally to the
// weights, producing an augmented unweighted dataset.
Dataset ipw_augment(const Dataset& ds, const PropensityScores& ps, IpwMode mode,
                    std::uint64_t seed, std::size_t resample_size = 0);

// (level x label) weight-mass table with per-level case fractions.
BalanceTable balance_table(const Dataset& ds);

}  // namespace confound
