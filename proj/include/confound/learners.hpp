#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "confound/matrix.hpp"

namespace confound {

enum class LearnerKind { logistic, forest };

LearnerKind parse_learner(const std::string& name);
const char* learner_name(LearnerKind kind);

struct LogisticConfig {
    int max_iterations = 100;
    double tolerance = 1e-8;
    double ridge = 1e-6;  // per-unit-weight L2 strength
};

struct ForestConfig {
    int n_trees = 200;
    int max_depth = 8;
    int min_leaf = 5;
    int features_per_split = 0;  // 0: ceil(sqrt(p))
    std::uint64_t seed = 0;
};

struct LearnerSpec {
    LearnerKind kind = LearnerKind::logistic;
    LogisticConfig logistic;
    ForestConfig forest;
};

// Axis-aligned binary tree; leaves hold the class-1 fraction.
struct TreeNode {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double leaf_value = 0.0;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    double score(std::span<const double> x) const;
    bool operator==(const DecisionTree&) const = default;
};

struct LearnerModel {
    LearnerKind kind = LearnerKind::logistic;
    std::size_t trained_features = 0;

    // logistic
    double intercept = 0.0;
    std::vector<double> coefficients;
    bool converged = true;
    int iterations = 0;
    std::vector<double> objective_trace;  // penalized log-likelihood per IRLS step

    // forest
    std::vector<DecisionTree> trees;

    double score_row(std::span<const double> x) const;
};

// Weighted ridge logistic regression by iteratively reweighted least squares.
// Maximizes sum_i w_i * loglik_i - ridge * (sum_i w_i) * |beta|^2, so scaling
// all weights by a constant leaves the fit unchanged and a weight of 2 equals
// physically duplicating the row. Step halving keeps the objective monotone.
LearnerModel fit_logistic(const Matrix& x, std::span<const int> y, std::span<const double> w,
                          const LogisticConfig& cfg);

// Random forest of CART trees on weighted bootstrap resamples (draw
// probability proportional to w), Gini splits over a random feature subset.
LearnerModel fit_forest(const Matrix& x, std::span<const int> y, std::span<const double> w,
                        const ForestConfig& cfg);

LearnerModel fit(const LearnerSpec& spec, const Matrix& x, std::span<const int> y,
                 std::span<const double> w);

std::vector<double> predict_proba(const LearnerModel& model, const Matrix& x);

// Plain-text model round trip.
void save_model(const LearnerModel& model, const std::string& path);
LearnerModel load_model(const std::string& path);

}  // namespace confound
