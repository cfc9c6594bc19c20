#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "confound/errors.hpp"
#include "confound/inference.hpp"
#include "confound/rng.hpp"
#include "doctest.h"
#include "support/gen.hpp"
#include "support/stat_tests.hpp"

using namespace confound;

namespace {

NullSummary summary(double mean, double sd, int count = 1000) {
    NullSummary s;
    s.mean = mean;
    s.sd = sd;
    s.count = count;
    return s;
}

}  // namespace

TEST_CASE("unconfounded_metric on the worked examples") {
    // identical nulls: the mapping is the identity
    CHECK(unconfounded_metric(0.73, summary(0.6, 0.05), summary(0.6, 0.05)) ==
          doctest::Approx(0.73).epsilon(1e-15));
    // equal spreads: a pure location shift
    CHECK(unconfounded_metric(0.81, summary(0.70, 0.03), summary(0.50, 0.03)) ==
          doctest::Approx(0.61).epsilon(1e-12));
    // wider reference than restricted null pushes the estimate further down
    const double m_u = unconfounded_metric(0.81, summary(0.70, 0.02), summary(0.50, 0.029));
    CHECK(m_u == doctest::Approx(0.6595).epsilon(1e-3));
    CHECK(m_u < 0.81);
}

TEST_CASE("unconfounded_metric refuses a degenerate restricted null") {
    CHECK_THROWS_AS(unconfounded_metric(0.8, summary(0.6, 0.0), summary(0.5, 0.03)),
                    NumericError);
}

TEST_CASE("analytic AUC null variance") {
    const NullSummary hundred = analytic_auc_null(100, 100);
    CHECK(hundred.mean == 0.5);
    CHECK(hundred.sd * hundred.sd == doctest::Approx(201.0 / 120000.0).epsilon(1e-12));

    // the held-out set sizes of the motivating study: 331 cases, 1255 controls
    const NullSummary paper = analytic_auc_null(1255, 331);
    CHECK(paper.sd * paper.sd == doctest::Approx(1587.0 / 4984860.0).epsilon(1e-12));
    CHECK(paper.sd * paper.sd == doctest::Approx(3.1837e-4).epsilon(1e-4));

    const NullSummary swapped = analytic_auc_null(331, 1255);
    CHECK(swapped.sd == paper.sd);

    CHECK_THROWS_AS(analytic_auc_null(0, 10), NumericError);
}

TEST_CASE("unconfounded_auc equals the general estimator with the analytic reference") {
    Rng rng(401);
    for (int rep = 0; rep < 2000; ++rep) {
        const double a = 0.3 + 0.6 * rng.next_double();
        const double s = 1e-4 + 0.2 * rng.next_double();
        const double auc_o = 0.2 + 0.7 * rng.next_double();
        const std::size_t nn = 1 + rng.below(2000);
        const std::size_t np = 1 + rng.below(2000);
        const double via_special = unconfounded_auc(auc_o, summary(a, s), nn, np);
        const double via_general =
            unconfounded_metric(auc_o, summary(a, s), analytic_auc_null(nn, np));
        CHECK(std::abs(via_special - via_general) < 1e-12);
    }
}

TEST_CASE("unconfounded_auc edge behavior") {
    const NullSummary analytic = analytic_auc_null(80, 40);
    // restricted null already matches the analytic null: no correction
    CHECK(unconfounded_auc(0.77, summary(0.5, analytic.sd), 80, 40) ==
          doctest::Approx(0.77).epsilon(1e-12));
    // observed equals the restricted mean: everything was confounding
    CHECK(unconfounded_auc(0.68, summary(0.68, 0.04), 80, 40) ==
          doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("confounding p-value basics") {
    CHECK(confounding_pvalue(summary(0.6, 0.1), summary(0.6, 0.05), 500) ==
          doctest::Approx(0.5).epsilon(1e-12));

    // paper-scale test set: overwhelming confounding evidence
    CHECK(auc_confounding_pvalue(0.7, 1255, 331, 1586) < 1e-16);

    // monotone decreasing in the restricted mean
    double last = 1.0;
    for (double a = 0.5; a <= 0.56; a += 0.005) {
        const double p = auc_confounding_pvalue(a, 300, 200, 500);
        CHECK(p <= last);
        last = p;
    }

    CHECK_THROWS_AS(confounding_pvalue(summary(0.6, 0.1), summary(0.5, 0.0), 100), NumericError);
    CHECK_THROWS_AS(confounding_pvalue(summary(0.6, 0.1), summary(0.5, 0.1), 0), NumericError);
}

TEST_CASE("auc_confounding_pvalue equals the general form with the analytic reference") {
    CHECK(auc_confounding_pvalue(0.5, 120, 80, 200) == doctest::Approx(0.5).epsilon(1e-12));
    Rng rng(409);
    for (int rep = 0; rep < 2000; ++rep) {
        const double a = 0.4 + 0.3 * rng.next_double();
        const std::size_t nn = 1 + rng.below(1500);
        const std::size_t np = 1 + rng.below(1500);
        const std::size_t n = 1 + rng.below(3000);
        const double special = auc_confounding_pvalue(a, nn, np, n);
        const double general =
            confounding_pvalue(summary(a, 0.123), analytic_auc_null(nn, np), n);
        CHECK(std::abs(special - general) < 1e-12);
    }
}

TEST_CASE("the unconfounded mapping preserves the p-value") {
    Rng rng(419);
    for (int rep = 0; rep < 5000; ++rep) {
        const double m_o = rng.next_double();
        const NullSummary restricted = summary(0.2 + 0.6 * rng.next_double(),
                                               1e-3 + 0.1 * rng.next_double());
        const NullSummary reference = summary(0.2 + 0.6 * rng.next_double(),
                                              1e-3 + 0.1 * rng.next_double());
        const double m_u = unconfounded_metric(m_o, restricted, reference);
        const double left = normal_cdf((m_u - reference.mean) / reference.sd);
        const double right = normal_cdf((m_o - restricted.mean) / restricted.sd);
        CHECK(std::abs(left - right) < 1e-9);
    }
}

TEST_CASE("the test statistic scales with the test size, never the permutation count") {
    NullSummary restricted = summary(0.58, 0.04, 500);
    const NullSummary reference = summary(0.5, 0.05, 500);
    const double p = confounding_pvalue(restricted, reference, 400);
    restricted.count = 1000;  // doubling b changes nothing
    CHECK(confounding_pvalue(restricted, reference, 400) == p);

    // doubling n moves the p-value strictly away from 0.5 when z != 0
    CHECK(confounding_pvalue(restricted, reference, 800) < p);
    const NullSummary below = summary(0.495, 0.04, 500);
    const double p_below = confounding_pvalue(below, reference, 400);
    CHECK(p_below > 0.5);
    CHECK(confounding_pvalue(below, reference, 800) > p_below);

    // z = 0 stays at exactly one half
    const NullSummary centered = summary(0.5, 0.04, 500);
    CHECK(confounding_pvalue(centered, reference, 400) == doctest::Approx(0.5));
    CHECK(confounding_pvalue(centered, reference, 800) == doctest::Approx(0.5));
}

TEST_CASE("largest remainder rounding") {
    const std::vector<double> probs = {0.4617, 0.3183, 0.22};
    for (std::size_t total : {7u, 97u, 1000u, 12345u}) {
        const std::vector<std::size_t> counts = largest_remainder_counts(probs, total);
        std::size_t sum = 0;
        for (std::size_t c : counts) sum += c;
        CHECK(sum == total);
        for (std::size_t j = 0; j < probs.size(); ++j) {
            CHECK(std::abs(static_cast<double>(counts[j]) -
                           probs[j] * static_cast<double>(total)) < 1.0);
        }
    }
}

TEST_CASE("target joint validation, io and factorization") {
    TargetJoint joint;
    joint.level_names = {"male", "female"};
    joint.probs = {{{5.0 / 18.0, 2.0 / 9.0}}, {{7.0 / 18.0, 1.0 / 9.0}}};
    joint.validate();

    const auto path = (std::filesystem::temp_directory_path() / "target_joint.csv").string();
    joint.save(path);
    const TargetJoint back = TargetJoint::load(path);
    CHECK(back.level_names == joint.level_names);
    CHECK(back.probs[0][0] == doctest::Approx(joint.probs[0][0]).epsilon(1e-15));

    const TargetJoint indep = joint.independence_factorization();
    const double p1 = 2.0 / 9.0 + 1.0 / 9.0;
    CHECK(indep.probs[0][1] == doctest::Approx(0.5 * p1).epsilon(1e-12));
    CHECK(indep.probs[1][0] == doctest::Approx(0.5 * (1.0 - p1)).epsilon(1e-12));

    TargetJoint bad = joint;
    bad.probs[0][0] = 0.9;
    CHECK_THROWS_AS(bad.validate(), SchemaError);
}

TEST_CASE("baseline_null subsamples the requested joint and flags infeasible requests") {
    Rng rng(421);
    const Dataset ds = testsupport::random_dataset(rng, 400, 3, 2, {0.35, 0.65}, 20);
    LearnerSpec learner;

    TargetJoint target;
    target.level_names = {"g0", "g1"};
    target.probs = {{{0.30, 0.20}}, {{0.20, 0.30}}};

    BaselineOptions opts;
    opts.iterations = 40;
    opts.test_size = 60;
    opts.train_size = 120;
    opts.seed = 9;
    const NullDistribution nd = baseline_null(target, ds, learner, MetricKind::auc, opts);
    CHECK(nd.count() == 40);
    CHECK(nd.scheme == NullScheme::baseline);

    SUBCASE("identical seeds reproduce the distribution") {
        const NullDistribution again = baseline_null(target, ds, learner, MetricKind::auc, opts);
        CHECK(again.samples == nd.samples);
    }
    SUBCASE("asking for more than a cell holds is infeasible") {
        BaselineOptions big = opts;
        big.test_size = 300;
        big.train_size = 900;
        CHECK_THROWS_AS(baseline_null(target, ds, learner, MetricKind::auc, big),
                        InfeasibleError);
    }
    SUBCASE("unknown target level is a schema error") {
        TargetJoint wrong = target;
        wrong.level_names[1] = "nope";
        CHECK_THROWS_AS(baseline_null(wrong, ds, learner, MetricKind::auc, opts), SchemaError);
    }
}

TEST_CASE("report serialization carries the headline numbers") {
    ConfoundingReport report;
    report.metric = MetricKind::auc;
    report.learner = LearnerKind::logistic;
    report.observed = 0.8123;
    report.restricted = summary(0.71, 0.021, 400);
    report.primary = make_reference_block(ReferenceKind::analytic_auc, analytic_auc_null(220, 80),
                                          report.observed, report.restricted, 300);
    report.test_size = 300;
    report.n_negative = 220;
    report.n_positive = 80;
    report.iterations = 400;
    report.seed = 42;

    std::ostringstream text;
    report.write(text);
    CHECK(text.str().find("[restricted-null]") != std::string::npos);
    CHECK(text.str().find("reference analytic-auc") != std::string::npos);
    CHECK(text.str().find("unconfounded_estimate") != std::string::npos);

    const std::string line = report.summary_line();
    CHECK(line.find("auc\tlogistic") == 0);
    const std::string header = ConfoundingReport::summary_header();
    CHECK(std::count(header.begin(), header.end(), '\t') ==
          std::count(line.begin(), line.end(), '\t'));
}
