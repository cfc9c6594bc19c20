#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "confound/adjustment.hpp"
#include "confound/errors.hpp"
#include "confound/rng.hpp"
#include "doctest.h"
#include "support/gen.hpp"
#include "support/stat_tests.hpp"

using namespace confound;

namespace {

// two levels: level a holds 10 cases / 30 controls, level b 8 / 8
Dataset imbalanced_toy(Rng& rng) {
    Dataset ds;
    const std::size_t n = 56;
    ds.features = Matrix(n, 2);
    std::vector<std::string> level_values;
    for (std::size_t i = 0; i < n; ++i) {
        const bool in_a = i < 40;
        level_values.push_back(in_a ? "a" : "b");
        ds.labels.push_back(in_a ? (i < 10 ? 1 : 0) : (i < 48 ? 1 : 0));
        ds.features(i, 0) = rng.next_normal();
        ds.features(i, 1) = rng.next_normal();
    }
    ds.confounder = Levels::from_strings(level_values);
    ds.weights.assign(n, 1.0);
    ds.feature_names = {"f1", "f2"};
    ds.validate();
    return ds;
}

}  // namespace

TEST_CASE("match_exact equalizes classes inside every stratum") {
    Rng rng(501);
    const Dataset ds = imbalanced_toy(rng);
    const std::vector<std::size_t> kept = match_exact(ds, 7);
    const Dataset matched = ds.subset(kept);

    const BalanceTable table = balance_table(matched);
    REQUIRE(table.rows.size() == 2);
    for (const auto& row : table.rows) {
        CHECK(row.case_fraction == doctest::Approx(0.5));
        CHECK(row.positives == row.negatives);
    }
    // level a: 10 cases so 20 rows survive; level b already balanced at 16
    CHECK(matched.size() == 36);

    SUBCASE("output indices are a sorted subset of the input") {
        std::set<std::size_t> unique(kept.begin(), kept.end());
        CHECK(unique.size() == kept.size());
        CHECK(std::is_sorted(kept.begin(), kept.end()));
        CHECK(*unique.rbegin() < ds.size());
    }
    SUBCASE("matching a matched set keeps every row") {
        const std::vector<std::size_t> again = match_exact(matched, 11);
        CHECK(again.size() == matched.size());
    }
    SUBCASE("deterministic under the seed") {
        CHECK(match_exact(ds, 7) == kept);
        CHECK(match_exact(ds, 8) != kept);
    }
}

TEST_CASE("match_exact drops one-class strata and fails when nothing is left") {
    std::vector<std::string> levels = {"a", "a", "a", "a", "z", "z"};
    Dataset ds;
    ds.features = Matrix(6, 1, 0.0);
    ds.labels = {1, 1, 0, 0, 1, 1};  // z has no controls
    ds.confounder = Levels::from_strings(levels);
    ds.weights.assign(6, 1.0);
    ds.feature_names = {"f1"};
    const std::vector<std::size_t> kept = match_exact(ds, 3);
    CHECK(kept == std::vector<std::size_t>{0, 1, 2, 3});

    ds.labels = {1, 1, 1, 1, 1, 1};
    CHECK_THROWS_AS(match_exact(ds, 3), InfeasibleError);
}

TEST_CASE("estimate_propensity recovers cell case fractions") {
    // 0.8 / 0.2 case rates across a binary confounder
    std::vector<std::string> level_values;
    std::vector<int> labels;
    for (int i = 0; i < 50; ++i) {
        level_values.push_back("m");
        labels.push_back(i < 40 ? 1 : 0);
    }
    for (int i = 0; i < 50; ++i) {
        level_values.push_back("f");
        labels.push_back(i < 10 ? 1 : 0);
    }
    const Levels lv = Levels::from_strings(level_values);
    const PropensityScores ps = estimate_propensity(lv, labels);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        CHECK(ps.scores[i] == doctest::Approx(i < 50 ? 0.8 : 0.2).epsilon(2e-3));
    }

    SUBCASE("scores are constant within a level") {
        for (std::size_t i = 1; i < 50; ++i) CHECK(ps.scores[i] == ps.scores[0]);
        for (std::size_t i = 51; i < 100; ++i) CHECK(ps.scores[i] == ps.scores[50]);
    }
}

TEST_CASE("propensity estimation rejects single-class input") {
    const std::vector<std::string> level_values = {"a", "a", "b", "b"};
    const std::vector<int> all_cases = {1, 1, 1, 1};
    CHECK_THROWS_AS(estimate_propensity(Levels::from_strings(level_values), all_cases),
                    NumericError);
    const std::vector<double> covariate = {0.1, 0.2, 0.3, 0.4};
    CHECK_THROWS_AS(estimate_propensity_linear(covariate, all_cases), NumericError);
}

TEST_CASE("estimate_propensity with independent label is flat near the base rate") {
    Rng rng(503);
    std::vector<std::string> level_values;
    std::vector<int> labels;
    for (int i = 0; i < 400; ++i) {
        level_values.push_back(rng.next_double() < 0.5 ? "x" : "y");
        labels.push_back(i % 2);
    }
    const PropensityScores ps = estimate_propensity(Levels::from_strings(level_values), labels);
    for (double s : ps.scores) CHECK(s == doctest::Approx(0.5).epsilon(0.12));
}

TEST_CASE("propensity scores are clipped into (0,1)") {
    std::vector<double> raw = {0.0, 1.0, 0.5, -2.0, 3.0};
    const PropensityScores ps = PropensityScores::from_scores(raw);
    CHECK(ps.scores[0] == doctest::Approx(1e-3));
    CHECK(ps.scores[1] == doctest::Approx(1.0 - 1e-3));
    CHECK(ps.scores[2] == doctest::Approx(0.5));
    CHECK(ps.scores[3] == doctest::Approx(1e-3));
    CHECK(ps.scores[4] == doctest::Approx(1.0 - 1e-3));
}

TEST_CASE("ipw weights mode attaches normalized inverse-propensity weights") {
    Rng rng(509);
    const Dataset ds = imbalanced_toy(rng);

    SUBCASE("flat scores give uniform weights") {
        const PropensityScores flat =
            PropensityScores::from_scores(std::vector<double>(ds.size(), 0.5));
        const Dataset out = ipw_augment(ds, flat, IpwMode::weights, 1);
        for (double w : out.weights) CHECK(w == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(out.has_weight_column);
    }
    SUBCASE("saturated propensities balance the weighted table") {
        const PropensityScores ps = estimate_propensity(ds.confounder, ds.labels);
        const Dataset out = ipw_augment(ds, ps, IpwMode::weights, 1);
        const BalanceTable before = balance_table(ds);
        const BalanceTable after = balance_table(out);
        CHECK(after.max_imbalance() < before.max_imbalance());
        for (const auto& row : after.rows) {
            CHECK(row.case_fraction == doctest::Approx(0.5).epsilon(0.02));
        }
        // normalized: total weight mass equals the sample count
        CHECK(after.total() == doctest::Approx(static_cast<double>(ds.size())).epsilon(1e-9));
    }
}

TEST_CASE("ipw resample with uniform weights reproduces the joint in expectation") {
    Rng rng(521);
    const Dataset ds = imbalanced_toy(rng);
    const PropensityScores flat =
        PropensityScores::from_scores(std::vector<double>(ds.size(), 0.5));
    // aggregate resampled cell counts across many seeds, chi-square against the original joint
    std::vector<double> observed(4, 0.0), expected(4, 0.0);
    const BalanceTable original = balance_table(ds);
    const int seeds = 200;
    for (int s = 0; s < seeds; ++s) {
        const Dataset out = ipw_augment(ds, flat, IpwMode::resample, 1000 + s);
        CHECK(out.size() == ds.size());
        const BalanceTable table = balance_table(out);
        for (std::size_t l = 0; l < table.rows.size(); ++l) {
            // level order can differ after subsetting; match by name
            for (std::size_t m = 0; m < original.rows.size(); ++m) {
                if (original.rows[m].level != table.rows[l].level) continue;
                observed[m * 2] += table.rows[l].negatives;
                observed[m * 2 + 1] += table.rows[l].positives;
            }
        }
    }
    for (std::size_t m = 0; m < original.rows.size(); ++m) {
        expected[m * 2] = original.rows[m].negatives * seeds;
        expected[m * 2 + 1] = original.rows[m].positives * seeds;
    }
    CHECK(testsupport::chi_square_gof_pvalue(observed, expected) > 0.001);
}

TEST_CASE("ipw resample with estimated propensities balances expected case fractions") {
    Rng rng(523);
    const Dataset ds = imbalanced_toy(rng);
    const PropensityScores ps = estimate_propensity(ds.confounder, ds.labels);
    double imbalance = 0.0;
    const int seeds = 60;
    for (int s = 0; s < seeds; ++s) {
        const Dataset out = ipw_augment(ds, ps, IpwMode::resample, 2000 + s);
        imbalance += balance_table(out).max_imbalance();
    }
    imbalance /= seeds;
    CHECK(imbalance < balance_table(ds).max_imbalance());

    SUBCASE("resample size override") {
        const Dataset out = ipw_augment(ds, ps, IpwMode::resample, 5, 100);
        CHECK(out.size() == 100);
    }
    SUBCASE("deterministic under the seed") {
        const Dataset a = ipw_augment(ds, ps, IpwMode::resample, 7);
        const Dataset b = ipw_augment(ds, ps, IpwMode::resample, 7);
        CHECK(a == b);
    }
}

TEST_CASE("balance_table counts exactly") {
    Rng rng(541);
    const Dataset ds = imbalanced_toy(rng);
    const BalanceTable table = balance_table(ds);
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0].level == "a");
    CHECK(table.rows[0].positives == 10.0);
    CHECK(table.rows[0].negatives == 30.0);
    CHECK(table.rows[1].positives == 8.0);
    CHECK(table.rows[1].negatives == 8.0);
    CHECK(table.total() == doctest::Approx(56.0));
    for (const auto& row : table.rows) {
        // row sums equal the per-level sample counts
        std::size_t count = 0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (ds.confounder.name_of(i) == row.level) ++count;
        }
        CHECK(row.positives + row.negatives == doctest::Approx(static_cast<double>(count)));
    }
}

TEST_CASE("estimate_propensity_linear fits a single-covariate logistic model") {
    Rng rng(547);
    std::vector<double> covariate;
    std::vector<int> labels;
    for (int i = 0; i < 300; ++i) {
        const double x = rng.next_normal();
        covariate.push_back(x);
        labels.push_back(rng.next_double() < 1.0 / (1.0 + std::exp(-1.5 * x)) ? 1 : 0);
    }
    const PropensityScores ps = estimate_propensity_linear(covariate, labels);
    // scores must be monotone in the covariate
    std::vector<std::size_t> order(covariate.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return covariate[a] < covariate[b]; });
    for (std::size_t k = 1; k < order.size(); ++k) {
        CHECK(ps.scores[order[k]] >= ps.scores[order[k - 1]] - 1e-12);
    }
}
