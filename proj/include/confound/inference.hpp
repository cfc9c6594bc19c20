#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "confound/dataset.hpp"
#include "confound/learners.hpp"
#include "confound/metrics.hpp"
#include "confound/permutation.hpp"

namespace confound {

enum class ReferenceKind { empirical_standard, analytic_auc, baseline_target };

const char* reference_name(ReferenceKind kind);

// Maps the observed metric from the restricted null onto the reference null
// so that tail probabilities are preserved:
//   (m_o - a_restricted) * (s_reference / s_restricted) + a_reference
double unconfounded_metric(double m_o, const NullSummary& restricted,
                           const NullSummary& reference);

// Normal approximation of the standard AUC permutation null:
// mean 0.5, variance (n_n + n_p + 1) / (12 n_n n_p).
NullSummary analytic_auc_null(std::size_t n_negative, std::size_t n_positive);

// AUC specialization of unconfounded_metric with the analytic reference.
double unconfounded_auc(double auc_o, const NullSummary& restricted, std::size_t n_negative,
                        std::size_t n_positive);

// One-sided upper-tail confounding test. The variance uses the test set size
// n, never the permutation count, so drawing more permutations cannot
// manufacture significance.
double confounding_pvalue(const NullSummary& restricted, const NullSummary& reference,
                          std::size_t test_size);

double auc_confounding_pvalue(double a_restricted, std::size_t n_negative,
                              std::size_t n_positive, std::size_t test_size);

// Joint distribution of (confounder level, label) in the target population.
struct TargetJoint {
    std::vector<std::string> level_names;
    std::vector<std::array<double, 2>> probs;  // probs[j] = {P(level j, 0), P(level j, 1)}

    std::size_t level_count() const { return level_names.size(); }
    void validate() const;

    // Product of the marginals: same level/label frequencies, no association.
    TargetJoint independence_factorization() const;

    // CSV with header "level,p_control,p_case".
    static TargetJoint load(const std::string& path);
    void save(const std::string& path) const;
};

// Splits `total` into integer counts proportional to `probs` by largest
// remainder; counts always sum to total.
std::vector<std::size_t> largest_remainder_counts(std::span<const double> probs,
                                                  std::size_t total);

struct BaselineOptions {
    int iterations = 1000;  // b
    std::size_t test_size = 0;
    std::size_t train_size = 0;  // 0: 3 * test_size
    std::uint64_t seed = 0;
    int threads = 1;
};

// Restricted permutation null over a subsample of the development data whose
// (level, label) joint matches the target population. The test subsample size
// must equal the test size behind the development restricted null so the two
// nulls are comparable.
NullDistribution baseline_null(const TargetJoint& target, const Dataset& ds,
                               const LearnerSpec& learner, MetricKind metric,
                               const BaselineOptions& opts);

struct ReferenceBlock {
    ReferenceKind kind = ReferenceKind::empirical_standard;
    NullSummary summary;
    double unconfounded = 0.0;
    double p_value = 1.0;
};

struct ConfoundingReport {
    MetricKind metric = MetricKind::auc;
    LearnerKind learner = LearnerKind::logistic;
    double observed = 0.0;
    NullSummary restricted;
    ReferenceBlock primary;
    std::optional<ReferenceBlock> analytic_comparison;  // filled for AUC runs
    std::size_t test_size = 0;
    std::size_t n_negative = 0;
    std::size_t n_positive = 0;
    int iterations = 0;
    std::uint64_t seed = 0;

    double unconfounded() const { return primary.unconfounded; }
    double p_value() const { return primary.p_value; }

    void write(std::ostream& out) const;   // structured key/value sections
    std::string summary_line() const;      // single machine-readable TSV row
    static std::string summary_header();
};

ReferenceBlock make_reference_block(ReferenceKind kind, const NullSummary& reference,
                                    double observed, const NullSummary& restricted,
                                    std::size_t test_size);

}  // namespace confound
