#include "confound/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "confound/errors.hpp"

namespace confound {

MetricKind parse_metric(const std::string& name) {
    if (name == "auc") return MetricKind::auc;
    if (name == "accuracy") return MetricKind::accuracy;
    if (name == "mse") return MetricKind::mse;
    if (name == "mae") return MetricKind::mae;
    throw SchemaError("unknown metric '" + name + "'");
}

const char* metric_name(MetricKind kind) {
    switch (kind) {
        case MetricKind::auc: return "auc";
        case MetricKind::accuracy: return "accuracy";
        case MetricKind::mse: return "mse";
        case MetricKind::mae: return "mae";
    }
    return "?";
}

void ScoredTestSet::validate() const {
    if (scores.size() != labels.size()) throw SchemaError("scores/labels length mismatch");
    if (scores.empty()) throw SchemaError("empty scored test set");
    for (double s : scores) {
        if (!std::isfinite(s)) throw NumericError("non-finite score");
    }
}

std::size_t ScoredTestSet::positives() const {
    std::size_t np = 0;
    for (double y : labels) {
        if (y == 1.0) {
            ++np;
        } else if (y != 0.0) {
            throw SchemaError("labels must be 0/1 for classification metrics");
        }
    }
    return np;
}

std::size_t ScoredTestSet::negatives() const { return size() - positives(); }

double auc(const ScoredTestSet& s) {
    s.validate();
    const std::size_t np = s.positives();
    const std::size_t nn = s.size() - np;
    if (np == 0 || nn == 0) throw NumericError("AUC needs both classes in the test set");

    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

    // average ranks over tied runs, then the Mann-Whitney rank-sum identity
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && s.scores[order[j + 1]] == s.scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (s.labels[order[k]] == 1.0) pos_rank_sum += avg_rank;
        }
        i = j + 1;
    }
    const double np_d = static_cast<double>(np);
    const double nn_d = static_cast<double>(nn);
    return (pos_rank_sum - np_d * (np_d + 1.0) / 2.0) / (np_d * nn_d);
}

double auc_pairwise_oracle(const ScoredTestSet& s) {
    s.validate();
    const std::size_t np = s.positives();
    if (np == 0 || np == s.size()) throw NumericError("AUC needs both classes in the test set");
    double wins = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.labels[i] != 1.0) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (s.labels[j] != 0.0) continue;
            if (s.scores[i] > s.scores[j]) {
                wins += 1.0;
            } else if (s.scores[i] == s.scores[j]) {
                wins += 0.5;
            }
        }
    }
    return wins / (static_cast<double>(np) * static_cast<double>(s.size() - np));
}

double mean_metric(MetricKind kind, const ScoredTestSet& s, double threshold) {
    s.validate();
    double acc = 0.0;
    switch (kind) {
        case MetricKind::accuracy: {
            s.positives();  // label check
            for (std::size_t i = 0; i < s.size(); ++i) {
                const double predicted = s.scores[i] >= threshold ? 1.0 : 0.0;
                if (predicted == s.labels[i]) acc += 1.0;
            }
            break;
        }
        case MetricKind::mse:
            for (std::size_t i = 0; i < s.size(); ++i) {
                const double d = s.scores[i] - s.labels[i];
                acc += d * d;
            }
            break;
        case MetricKind::mae:
            for (std::size_t i = 0; i < s.size(); ++i) {
                acc += std::abs(s.scores[i] - s.labels[i]);
            }
            break;
        case MetricKind::auc:
            throw SchemaError("auc is not a mean metric");
    }
    return acc / static_cast<double>(s.size());
}

double compute_metric(MetricKind kind, const ScoredTestSet& s) {
    return kind == MetricKind::auc ? auc(s) : mean_metric(kind, s);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double normal_sf(double x) { return 0.5 * std::erfc(x * M_SQRT1_2); }

}  // namespace confound
