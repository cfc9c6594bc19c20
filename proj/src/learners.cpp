#include "confound/learners.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "confound/errors.hpp"
#include "confound/rng.hpp"

namespace confound {

namespace {

double sigmoid(double eta) {
    if (eta >= 0.0) {
        return 1.0 / (1.0 + std::exp(-eta));
    }
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

// log(1 + exp(eta)) without overflow
double log1pexp(double eta) {
    if (eta > 0.0) return eta + std::log1p(std::exp(-eta));
    return std::log1p(std::exp(eta));
}

void check_training_input(const Matrix& x, std::span<const int> y, std::span<const double> w) {
    if (x.rows != y.size() || x.rows != w.size()) {
        throw SchemaError("training data length mismatch");
    }
    if (x.rows == 0 || x.cols == 0) throw SchemaError("empty training data");
    double total = 0.0;
    for (double wi : w) {
        if (!std::isfinite(wi) || wi < 0.0) throw SchemaError("weights must be finite and >= 0");
        total += wi;
    }
    if (total <= 0.0) throw SchemaError("all training weights are zero");
    for (int yi : y) {
        if (yi != 0 && yi != 1) throw SchemaError("labels must be 0/1");
    }
}

}  // namespace

LearnerKind parse_learner(const std::string& name) {
    if (name == "logistic") return LearnerKind::logistic;
    if (name == "forest") return LearnerKind::forest;
    throw SchemaError("unknown learner '" + name + "'");
}

const char* learner_name(LearnerKind kind) {
    return kind == LearnerKind::logistic ? "logistic" : "forest";
}

double DecisionTree::score(std::span<const double> x) const {
    int node = 0;
    while (!nodes[node].is_leaf()) {
        node = x[nodes[node].feature] <= nodes[node].threshold ? nodes[node].left
                                                               : nodes[node].right;
    }
    return nodes[node].leaf_value;
}

double LearnerModel::score_row(std::span<const double> x) const {
    if (kind == LearnerKind::logistic) {
        double eta = intercept;
        for (std::size_t j = 0; j < coefficients.size(); ++j) eta += coefficients[j] * x[j];
        return sigmoid(eta);
    }
    double sum = 0.0;
    for (const auto& tree : trees) sum += tree.score(x);
    return sum / static_cast<double>(trees.size());
}

LearnerModel fit_logistic(const Matrix& x, std::span<const int> y, std::span<const double> w,
                          const LogisticConfig& cfg) {
    check_training_input(x, y, w);
    if (cfg.max_iterations <= 0 || !(cfg.tolerance > 0.0)) {
        throw SchemaError("bad logistic configuration");
    }
    const std::size_t n = x.rows;
    const std::size_t p = x.cols;
    const std::size_t d = p + 1;  // intercept + coefficients
    const double total_weight = std::accumulate(w.begin(), w.end(), 0.0);
    const double penalty = cfg.ridge * total_weight;

    std::vector<double> beta(d, 0.0);
    std::vector<double> mu(n, 0.5);

    auto objective = [&](const std::vector<double>& b) {
        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double e = b[0];
            const auto row = x.row(i);
            for (std::size_t j = 0; j < p; ++j) e += b[j + 1] * row[j];
            obj += w[i] * (y[i] * e - log1pexp(e));
        }
        double b2 = 0.0;
        for (double bj : b) b2 += bj * bj;
        return obj - penalty * b2;
    };

    LearnerModel model;
    model.kind = LearnerKind::logistic;
    model.trained_features = p;

    double current = objective(beta);
    model.objective_trace.push_back(current);

    Matrix hess(d, d);
    std::vector<double> grad(d);
    int iter = 0;
    bool converged = false;
    while (iter < cfg.max_iterations) {
        ++iter;
        for (std::size_t i = 0; i < n; ++i) {
            double e = beta[0];
            const auto row = x.row(i);
            for (std::size_t j = 0; j < p; ++j) e += beta[j + 1] * row[j];
            mu[i] = sigmoid(e);
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        std::fill(hess.values.begin(), hess.values.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (w[i] == 0.0) continue;
            const auto row = x.row(i);
            const double r = w[i] * (y[i] - mu[i]);
            const double v = w[i] * mu[i] * (1.0 - mu[i]);
            grad[0] += r;
            hess(0, 0) += v;
            for (std::size_t j = 0; j < p; ++j) {
                grad[j + 1] += r * row[j];
                const double vr = v * row[j];
                hess(j + 1, 0) += vr;
                for (std::size_t k = 0; k <= j; ++k) {
                    hess(j + 1, k + 1) += vr * row[k];
                }
            }
        }
        for (std::size_t j = 0; j < d; ++j) {
            grad[j] -= 2.0 * penalty * beta[j];
            hess(j, j) += 2.0 * penalty;
            for (std::size_t k = j + 1; k < d; ++k) hess(j, k) = hess(k, j);
        }

        std::vector<double> step;
        try {
            step = solve_spd(hess, grad);
        } catch (const NumericError&) {
            throw NumericError("logistic fit: singular weighted normal equations (degenerate features)");
        }

        // backtrack until the penalized log-likelihood does not decrease
        double scale = 1.0;
        std::vector<double> candidate(d);
        double next = current;
        for (int halving = 0; halving < 40; ++halving) {
            for (std::size_t j = 0; j < d; ++j) candidate[j] = beta[j] + scale * step[j];
            next = objective(candidate);
            if (next >= current - 1e-12 * (1.0 + std::abs(current))) break;
            scale *= 0.5;
        }
        assert(next >= current - 1e-9 * (1.0 + std::abs(current)));

        double max_change = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            max_change = std::max(max_change, std::abs(scale * step[j]));
        }
        beta = candidate;
        current = std::max(next, current);
        model.objective_trace.push_back(current);
        if (max_change < cfg.tolerance) {
            converged = true;
            break;
        }
    }

    model.intercept = beta[0];
    model.coefficients.assign(beta.begin() + 1, beta.end());
    model.converged = converged;
    model.iterations = iter;
    return model;
}

namespace {

struct TreeBuilder {
    const Matrix& x;
    std::span<const int> y;
    const ForestConfig& cfg;
    Rng& rng;
    std::vector<TreeNode>& nodes;
    std::vector<std::size_t>& samples;  // bootstrap indices, partitioned in place
    std::vector<int> feature_pool;

    int build(std::size_t begin, std::size_t end, int depth) {
        const std::size_t count = end - begin;
        std::size_t ones = 0;
        for (std::size_t k = begin; k < end; ++k) ones += y[samples[k]];
        const int node_id = static_cast<int>(nodes.size());
        nodes.push_back({});
        nodes[node_id].leaf_value = static_cast<double>(ones) / static_cast<double>(count);
        if (depth >= cfg.max_depth || ones == 0 || ones == count ||
            count < 2 * static_cast<std::size_t>(cfg.min_leaf)) {
            return node_id;
        }

        const std::size_t p = x.cols;
        std::size_t mtry = cfg.features_per_split > 0
                               ? static_cast<std::size_t>(cfg.features_per_split)
                               : static_cast<std::size_t>(
                                     std::ceil(std::sqrt(static_cast<double>(p))));
        mtry = std::min(mtry, p);
        for (std::size_t j = 0; j < mtry; ++j) {
            const std::size_t pick = j + rng.below(p - j);
            std::swap(feature_pool[j], feature_pool[pick]);
        }

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_score = -1.0;  // sum over children of (n1^2 + n0^2) / n
        std::vector<std::size_t> order(samples.begin() + begin, samples.begin() + end);
        for (std::size_t j = 0; j < mtry; ++j) {
            const int f = feature_pool[j];
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return x(a, f) < x(b, f);
            });
            std::size_t left_n = 0, left_ones = 0;
            for (std::size_t k = 0; k + 1 < count; ++k) {
                ++left_n;
                left_ones += y[order[k]];
                if (x(order[k], f) == x(order[k + 1], f)) continue;
                if (left_n < static_cast<std::size_t>(cfg.min_leaf) ||
                    count - left_n < static_cast<std::size_t>(cfg.min_leaf)) {
                    continue;
                }
                const double l1 = static_cast<double>(left_ones);
                const double l0 = static_cast<double>(left_n - left_ones);
                const double r1 = static_cast<double>(ones - left_ones);
                const double r0 = static_cast<double>((count - left_n) - (ones - left_ones));
                const double score = (l1 * l1 + l0 * l0) / static_cast<double>(left_n) +
                                     (r1 * r1 + r0 * r0) / static_cast<double>(count - left_n);
                if (score > best_score) {
                    best_score = score;
                    best_feature = f;
                    best_threshold = 0.5 * (x(order[k], f) + x(order[k + 1], f));
                }
            }
        }
        if (best_feature < 0) return node_id;

        const auto mid = std::stable_partition(
            samples.begin() + begin, samples.begin() + end,
            [&](std::size_t i) { return x(i, best_feature) <= best_threshold; });
        const std::size_t split_at = static_cast<std::size_t>(mid - samples.begin());
        if (split_at == begin || split_at == end) return node_id;

        nodes[node_id].feature = best_feature;
        nodes[node_id].threshold = best_threshold;
        nodes[node_id].left = build(begin, split_at, depth + 1);
        nodes[node_id].right = build(split_at, end, depth + 1);
        return node_id;
    }
};

}  // namespace

LearnerModel fit_forest(const Matrix& x, std::span<const int> y, std::span<const double> w,
                        const ForestConfig& cfg) {
    check_training_input(x, y, w);
    if (cfg.n_trees <= 0 || cfg.max_depth < 0 || cfg.min_leaf <= 0) {
        throw SchemaError("bad forest configuration");
    }
    const std::size_t n = x.rows;
    std::size_t ones = 0;
    for (int yi : y) ones += yi;
    if (ones == 0 || ones == n) throw NumericError("forest fit needs both classes");

    std::vector<double> cumulative(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += w[i];
        cumulative[i] = acc;
    }

    LearnerModel model;
    model.kind = LearnerKind::forest;
    model.trained_features = x.cols;
    model.trees.resize(cfg.n_trees);
    for (int t = 0; t < cfg.n_trees; ++t) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(t)));
        std::vector<std::size_t> samples(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = rng.next_double() * acc;
            samples[i] = static_cast<std::size_t>(
                std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
            if (samples[i] >= n) samples[i] = n - 1;
        }
        std::vector<int> pool(x.cols);
        std::iota(pool.begin(), pool.end(), 0);
        TreeBuilder builder{x, y, cfg, rng, model.trees[t].nodes, samples, std::move(pool)};
        builder.build(0, n, 0);
    }
    return model;
}

LearnerModel fit(const LearnerSpec& spec, const Matrix& x, std::span<const int> y,
                 std::span<const double> w) {
    if (spec.kind == LearnerKind::logistic) return fit_logistic(x, y, w, spec.logistic);
    return fit_forest(x, y, w, spec.forest);
}

std::vector<double> predict_proba(const LearnerModel& model, const Matrix& x) {
    if (x.cols != model.trained_features) {
        throw SchemaError("feature count differs from the trained model");
    }
    std::vector<double> scores(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) scores[i] = model.score_row(x.row(i));
    return scores;
}

void save_model(const LearnerModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write '" + path + "'");
    char buf[40];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    if (model.kind == LearnerKind::logistic) {
        out << "logistic " << model.trained_features << "\n";
        out << "intercept " << fmt(model.intercept) << "\n";
        out << "coefficients";
        for (double c : model.coefficients) out << ' ' << fmt(c);
        out << "\n";
        out << "converged " << (model.converged ? 1 : 0) << " iterations " << model.iterations
            << "\n";
    } else {
        out << "forest " << model.trained_features << " trees " << model.trees.size() << "\n";
        for (const auto& tree : model.trees) {
            out << "tree " << tree.nodes.size() << "\n";
            for (const auto& node : tree.nodes) {
                out << node.feature << ' ' << fmt(node.threshold) << ' ' << node.left << ' '
                    << node.right << ' ' << fmt(node.leaf_value) << "\n";
            }
        }
    }
}

LearnerModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open '" + path + "'");
    std::string kind;
    in >> kind;
    LearnerModel model;
    if (kind == "logistic") {
        model.kind = LearnerKind::logistic;
        in >> model.trained_features;
        std::string tag;
        in >> tag >> model.intercept;
        in >> tag;
        model.coefficients.resize(model.trained_features);
        for (double& c : model.coefficients) in >> c;
        int conv = 1;
        in >> tag >> conv >> tag >> model.iterations;
        model.converged = conv != 0;
    } else if (kind == "forest") {
        model.kind = LearnerKind::forest;
        std::size_t n_trees = 0;
        std::string tag;
        in >> model.trained_features >> tag >> n_trees;
        model.trees.resize(n_trees);
        for (auto& tree : model.trees) {
            std::size_t n_nodes = 0;
            in >> tag >> n_nodes;
            tree.nodes.resize(n_nodes);
            for (auto& node : tree.nodes) {
                in >> node.feature >> node.threshold >> node.left >> node.right >> node.leaf_value;
            }
        }
    } else {
        throw SchemaError("unknown model kind '" + kind + "' in '" + path + "'");
    }
    if (!in) throw SchemaError("truncated model file '" + path + "'");
    return model;
}

}  // namespace confound
