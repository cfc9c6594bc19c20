#pragma once

#include <span>
#include <string>
#include <vector>

namespace confound {

enum class MetricKind { auc, accuracy, mse, mae };

MetricKind parse_metric(const std::string& name);
const char* metric_name(MetricKind kind);

// Predicted scores paired with observed outcomes. Labels are held as reals
// so the same container serves classification (0/1) and regression metrics.
struct ScoredTestSet {
    std::vector<double> scores;
    std::vector<double> labels;

    std::size_t size() const { return scores.size(); }
    void validate() const;
    std::size_t positives() const;  // labels must be 0/1
    std::size_t negatives() const;
};

// Rank-based AUC with midrank tie handling, O(m log m).
double auc(const ScoredTestSet& s);

// Explicit positive x negative pair loop; the independent check for auc().
double auc_pairwise_oracle(const ScoredTestSet& s);

// accuracy (score thresholded), mse or mae over the test set.
double mean_metric(MetricKind kind, const ScoredTestSet& s, double threshold = 0.5);

double compute_metric(MetricKind kind, const ScoredTestSet& s);

// Standard normal CDF and upper tail, both accurate to well under 1e-12.
double normal_cdf(double x);
double normal_sf(double x);

}  // namespace confound
