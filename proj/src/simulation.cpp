#include "confound/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "confound/errors.hpp"
#include "confound/inference.hpp"
#include "confound/permutation.hpp"

namespace confound {

void SimScenario::validate() const {
    double total = 0.0;
    for (const auto& row : joint) {
        for (double p : row) {
            if (!std::isfinite(p) || p < 0.0) throw SchemaError("joint entries must be >= 0");
            total += p;
        }
    }
    if (std::abs(total - 1.0) > 1e-9) throw SchemaError("joint table must sum to 1");
    if (n_samples < 4) throw SchemaError("scenario needs at least 4 samples");
    if (feature_count < 1) throw SchemaError("scenario needs at least 1 feature");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw SchemaError("test_fraction must lie in (0,1)");
    }
}

BernoulliDraw sample_bivariate_bernoulli(const std::array<std::array<double, 2>, 2>& joint,
                                         std::size_t n, Rng& rng) {
    double total = 0.0;
    for (const auto& row : joint) {
        for (double p : row) {
            if (!std::isfinite(p) || p < 0.0) throw SchemaError("joint entries must be >= 0");
            total += p;
        }
    }
    if (std::abs(total - 1.0) > 1e-9) throw SchemaError("joint table must sum to 1");
    // cells in order (c,y) = (0,0), (0,1), (1,0), (1,1)
    const double c00 = joint[0][0];
    const double c01 = c00 + joint[0][1];
    const double c10 = c01 + joint[1][0];
    BernoulliDraw draw;
    draw.c.resize(n);
    draw.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.next_double() * total;
        if (u < c00) {
            draw.c[i] = 0;
            draw.y[i] = 0;
        } else if (u < c01) {
            draw.c[i] = 0;
            draw.y[i] = 1;
        } else if (u < c10) {
            draw.c[i] = 1;
            draw.y[i] = 0;
        } else {
            draw.c[i] = 1;
            draw.y[i] = 1;
        }
    }
    return draw;
}

Matrix generate_features(std::span<const int> c, std::span<const int> y,
                         const SimScenario& scenario, Rng& rng) {
    if (c.size() != y.size()) throw SchemaError("generate_features: length mismatch");
    Matrix x(c.size(), scenario.feature_count);
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double base = scenario.beta_y * y[i] + scenario.beta_c * c[i];
        for (std::size_t j = 0; j < scenario.feature_count; ++j) {
            x(i, j) = base + rng.next_normal();
        }
    }
    return x;
}

Dataset simulate_dataset(const SimScenario& scenario, std::uint64_t seed) {
    scenario.validate();
    Rng rng(derive_seed(seed, 0x73696d64ULL));  // stream tag "simd"
    const BernoulliDraw draw = sample_bivariate_bernoulli(scenario.joint, scenario.n_samples, rng);
    Dataset ds;
    ds.features = generate_features(draw.c, draw.y, scenario, rng);
    ds.labels = draw.y;
    std::vector<std::string> level_values(scenario.n_samples);
    for (std::size_t i = 0; i < scenario.n_samples; ++i) {
        level_values[i] = draw.c[i] == 0 ? "c0" : "c1";
    }
    ds.confounder = Levels::from_strings(level_values);
    ds.weights.assign(scenario.n_samples, 1.0);
    ds.feature_names.resize(scenario.feature_count);
    for (std::size_t j = 0; j < scenario.feature_count; ++j) {
        ds.feature_names[j] = "x" + std::to_string(j + 1);
    }
    ds.label_name = "y";
    ds.confounder_name = "c";
    ds.validate();
    return ds;
}

namespace {

double replicate_pvalue(const SimScenario& scenario, const ExperimentOptions& opts,
                        std::uint64_t replicate_seed) {
    const Dataset ds = simulate_dataset(scenario, replicate_seed);
    const SplitIndices split =
        stratified_split(ds, scenario.test_fraction, derive_seed(replicate_seed, 1));
    PermutationOptions popts;
    popts.iterations = opts.permutations;
    popts.seed = derive_seed(replicate_seed, 2);
    popts.threads = 1;  // parallelism lives at the replicate level
    const NullDistribution restricted =
        permutation_null(opts.learner, ds, split, MetricKind::auc, NullScheme::restricted, popts);
    const NullSummary summary = summarize(restricted);
    std::size_t n_pos = 0;
    for (std::size_t i : split.test) n_pos += ds.labels[i];
    const std::size_t n_test = split.test.size();
    return auc_confounding_pvalue(summary.mean, n_test - n_pos, n_pos, n_test);
}

}  // namespace

std::vector<double> run_confounding_pvalues(const SimScenario& scenario,
                                            const ExperimentOptions& opts) {
    scenario.validate();
    if (opts.replicates < 1) throw SchemaError("replicates must be >= 1");
    std::vector<double> pvalues(opts.replicates, 0.0);
    std::vector<std::exception_ptr> errors;
    const int threads = std::max(1, opts.threads);

    auto run_range = [&](int begin, int step, std::exception_ptr& slot) {
        try {
            for (int r = begin; r < opts.replicates; r += step) {
                pvalues[r] = replicate_pvalue(
                    scenario, opts, derive_seed(opts.seed, static_cast<std::uint64_t>(r)));
            }
        } catch (const std::exception& e) {
            try {
                throw NumericError(std::string("replicate failed: ") + e.what());
            } catch (...) {
                slot = std::current_exception();
            }
        }
    };

    if (threads == 1) {
        std::exception_ptr err;
        run_range(0, 1, err);
        if (err) std::rethrow_exception(err);
    } else {
        errors.resize(threads);
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] { run_range(t, threads, errors[t]); });
        }
        for (auto& th : pool) th.join();
        for (const auto& err : errors) {
            if (err) std::rethrow_exception(err);
        }
    }
    return pvalues;
}

std::vector<double> default_alpha_grid() {
    std::vector<double> alphas;
    for (int i = 0; i <= 30; ++i) alphas.push_back(0.005 * i);
    return alphas;
}

PowerCurve power_from_pvalues(const std::string& name, std::span<const double> pvalues,
                              std::span<const double> alphas) {
    PowerCurve curve;
    curve.scenario = name;
    curve.alphas.assign(alphas.begin(), alphas.end());
    curve.replicates = static_cast<int>(pvalues.size());
    for (double alpha : alphas) {
        std::size_t rejected = 0;
        for (double p : pvalues) {
            if (p <= alpha) ++rejected;
        }
        curve.power.push_back(static_cast<double>(rejected) /
                              static_cast<double>(pvalues.size()));
    }
    return curve;
}

std::vector<PowerCurve> run_power_experiment(std::span<const SimScenario> scenarios,
                                             const ExperimentOptions& opts,
                                             std::span<const double> alphas) {
    std::vector<PowerCurve> curves;
    for (const auto& scenario : scenarios) {
        const std::vector<double> pvalues = run_confounding_pvalues(scenario, opts);
        curves.push_back(power_from_pvalues(scenario.name, pvalues, alphas));
    }
    return curves;
}

std::vector<double> run_type1_experiment(const SimScenario& scenario,
                                         const ExperimentOptions& opts) {
    if (scenario.beta_c != 0.0) {
        throw SchemaError("type-I experiment requires beta_c = 0");
    }
    return run_confounding_pvalues(scenario, opts);
}

}  // namespace confound
