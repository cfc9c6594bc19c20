#include "confound/permutation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <thread>

#include "confound/errors.hpp"

namespace confound {

const char* scheme_name(NullScheme scheme) {
    switch (scheme) {
        case NullScheme::restricted: return "restricted";
        case NullScheme::standard: return "standard";
        case NullScheme::baseline: return "baseline";
    }
    return "?";
}

std::vector<int> restricted_shuffle(std::span<const int> y, std::span<const int> levels,
                                    Rng& rng) {
    if (y.size() != levels.size()) throw SchemaError("restricted_shuffle: length mismatch");
    int k = 0;
    for (int l : levels) k = std::max(k, l + 1);
    std::vector<std::vector<std::size_t>> strata(k);
    for (std::size_t i = 0; i < levels.size(); ++i) {
        strata[levels[i]].push_back(i);
    }
    std::vector<int> out(y.begin(), y.end());
    for (auto& members : strata) {
        for (std::size_t i = members.size(); i > 1; --i) {
            const std::size_t j = rng.below(i);
            std::swap(out[members[i - 1]], out[members[j]]);
        }
    }
    return out;
}

std::vector<int> standard_shuffle(std::span<const int> y, Rng& rng) {
    std::vector<int> out(y.begin(), y.end());
    for (std::size_t i = out.size(); i > 1; --i) {
        std::swap(out[i - 1], out[rng.below(i)]);
    }
    return out;
}

namespace {

struct SplitView {
    Matrix x_train;
    Matrix x_test;
    std::vector<int> y_train;
    std::vector<int> y_test;
    std::vector<int> c_train;
    std::vector<int> c_test;
    std::vector<double> w_train;
};

SplitView make_view(const Dataset& ds, const SplitIndices& split) {
    split.validate(ds.size());
    SplitView v;
    v.x_train = Matrix(split.train.size(), ds.feature_count());
    v.x_test = Matrix(split.test.size(), ds.feature_count());
    for (std::size_t k = 0; k < split.train.size(); ++k) {
        const std::size_t i = split.train[k];
        std::copy(ds.features.row(i).begin(), ds.features.row(i).end(), v.x_train.row(k).begin());
        v.y_train.push_back(ds.labels[i]);
        v.c_train.push_back(ds.confounder.index[i]);
        v.w_train.push_back(ds.weights[i]);
    }
    for (std::size_t k = 0; k < split.test.size(); ++k) {
        const std::size_t i = split.test[k];
        std::copy(ds.features.row(i).begin(), ds.features.row(i).end(), v.x_test.row(k).begin());
        v.y_test.push_back(ds.labels[i]);
        v.c_test.push_back(ds.confounder.index[i]);
    }
    return v;
}

double metric_of(MetricKind metric, const std::vector<double>& scores,
                 const std::vector<int>& y) {
    ScoredTestSet s;
    s.scores = scores;
    s.labels.assign(y.begin(), y.end());
    return compute_metric(metric, s);
}

}  // namespace

NullDistribution permutation_null(const LearnerSpec& learner, const Dataset& ds,
                                  const SplitIndices& split, MetricKind metric, NullScheme scheme,
                                  const PermutationOptions& opts) {
    if (opts.iterations < 1) throw SchemaError("permutation count b must be >= 1");
    ds.validate();
    const SplitView view = make_view(ds, split);
    if (metric == MetricKind::auc) {
        const auto ones = std::count(view.y_test.begin(), view.y_test.end(), 1);
        if (ones == 0 || static_cast<std::size_t>(ones) == view.y_test.size()) {
            throw NumericError("AUC permutation null needs both classes in the test set");
        }
    }

    NullDistribution nd;
    nd.scheme = scheme;
    nd.metric = metric;
    nd.samples.assign(opts.iterations, 0.0);

    auto run_iteration = [&](int i) {
        Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(i)));
        std::vector<int> y_train;
        std::vector<int> y_test;
        if (scheme == NullScheme::standard) {
            y_train = standard_shuffle(view.y_train, rng);
            y_test = standard_shuffle(view.y_test, rng);
        } else {
            y_train = restricted_shuffle(view.y_train, view.c_train, rng);
            y_test = restricted_shuffle(view.y_test, view.c_test, rng);
        }
        LearnerSpec iteration_spec = learner;
        iteration_spec.forest.seed =
            derive_seed(opts.seed, 0x666f726573740000ULL + static_cast<std::uint64_t>(i));
        LearnerModel model;
        try {
            model = fit(iteration_spec, view.x_train, y_train, view.w_train);
        } catch (const std::exception& e) {
            throw NumericError("learner fit failed at permutation " + std::to_string(i) + ": " +
                               e.what());
        }
        const std::vector<double> scores = predict_proba(model, view.x_test);
        nd.samples[i] = metric_of(metric, scores, y_test);
    };

    const int threads = std::max(1, opts.threads);
    if (threads == 1) {
        for (int i = 0; i < opts.iterations; ++i) run_iteration(i);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (int i = t; i < opts.iterations; i += threads) run_iteration(i);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& err : errors) {
            if (err) std::rethrow_exception(err);
        }
    }
    return nd;
}

NullSummary summarize(const NullDistribution& nd) {
    const int b = nd.count();
    if (b < 2) {
        throw NumericError("null summary needs at least 2 samples (got " + std::to_string(b) +
                           ")");
    }
    double mean = 0.0;
    for (double v : nd.samples) mean += v;
    mean /= b;
    double ss = 0.0;
    for (double v : nd.samples) ss += (v - mean) * (v - mean);
    NullSummary s;
    s.mean = mean;
    s.sd = std::sqrt(ss / (b - 1));
    s.count = b;
    return s;
}

double evaluate_observed(const LearnerSpec& learner, const Dataset& ds, const SplitIndices& split,
                         MetricKind metric, LearnerModel* fitted) {
    ds.validate();
    const SplitView view = make_view(ds, split);
    const LearnerModel model = fit(learner, view.x_train, view.y_train, view.w_train);
    const std::vector<double> scores = predict_proba(model, view.x_test);
    if (fitted != nullptr) *fitted = model;
    return metric_of(metric, scores, view.y_test);
}

void write_samples_tsv(const NullDistribution& nd, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write '" + path + "'");
    char buf[40];
    for (double v : nd.samples) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf << '\n';
    }
}

}  // namespace confound
