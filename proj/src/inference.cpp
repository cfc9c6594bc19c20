#include "confound/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "confound/errors.hpp"
#include "confound/rng.hpp"

namespace confound {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

const char* reference_name(ReferenceKind kind) {
    switch (kind) {
        case ReferenceKind::empirical_standard: return "empirical-standard";
        case ReferenceKind::analytic_auc: return "analytic-auc";
        case ReferenceKind::baseline_target: return "baseline-target";
    }
    return "?";
}

double unconfounded_metric(double m_o, const NullSummary& restricted,
                           const NullSummary& reference) {
    if (!(restricted.sd > 0.0)) {
        throw NumericError("degenerate restricted null (sd = 0); unconfounded metric undefined");
    }
    if (reference.sd < 0.0) throw NumericError("negative reference sd");
    return (m_o - restricted.mean) * (reference.sd / restricted.sd) + reference.mean;
}

NullSummary analytic_auc_null(std::size_t n_negative, std::size_t n_positive) {
    if (n_negative == 0 || n_positive == 0) {
        throw NumericError("analytic AUC null needs both class counts positive");
    }
    const double nn = static_cast<double>(n_negative);
    const double np = static_cast<double>(n_positive);
    NullSummary s;
    s.mean = 0.5;
    s.sd = std::sqrt((nn + np + 1.0) / (12.0 * nn * np));
    s.count = 0;  // analytic, not sampled
    return s;
}

double unconfounded_auc(double auc_o, const NullSummary& restricted, std::size_t n_negative,
                        std::size_t n_positive) {
    return unconfounded_metric(auc_o, restricted, analytic_auc_null(n_negative, n_positive));
}

double confounding_pvalue(const NullSummary& restricted, const NullSummary& reference,
                          std::size_t test_size) {
    if (!(reference.sd > 0.0)) throw NumericError("degenerate reference null (sd = 0)");
    if (test_size == 0) throw NumericError("test size must be >= 1");
    const double z = (restricted.mean - reference.mean) /
                     (reference.sd / std::sqrt(static_cast<double>(test_size)));
    return normal_sf(z);
}

double auc_confounding_pvalue(double a_restricted, std::size_t n_negative,
                              std::size_t n_positive, std::size_t test_size) {
    const NullSummary reference = analytic_auc_null(n_negative, n_positive);
    NullSummary restricted;
    restricted.mean = a_restricted;
    restricted.sd = 1.0;  // unused by the test statistic
    restricted.count = 0;
    return confounding_pvalue(restricted, reference, test_size);
}

void TargetJoint::validate() const {
    if (level_names.empty() || level_names.size() != probs.size()) {
        throw SchemaError("target joint: level/probability shape mismatch");
    }
    double total = 0.0;
    for (const auto& row : probs) {
        for (double p : row) {
            if (!std::isfinite(p) || p < 0.0) throw SchemaError("target joint entries must be >= 0");
            total += p;
        }
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw SchemaError("target joint probabilities must sum to 1 (got " + fmt6(total) + ")");
    }
    for (std::size_t j = 0; j < probs.size(); ++j) {
        if (probs[j][0] + probs[j][1] <= 0.0) {
            throw SchemaError("target joint level '" + level_names[j] + "' has zero mass");
        }
    }
}

TargetJoint TargetJoint::independence_factorization() const {
    validate();
    TargetJoint out;
    out.level_names = level_names;
    double p1 = 0.0;
    for (const auto& row : probs) p1 += row[1];
    for (const auto& row : probs) {
        const double mass = row[0] + row[1];
        out.probs.push_back({mass * (1.0 - p1), mass * p1});
    }
    return out;
}

TargetJoint TargetJoint::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("'" + path + "' is empty");
    auto trim = [](const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return std::string();
        return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
    };
    TargetJoint joint;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::stringstream ss(line);
        std::string level, p0, p1;
        if (!std::getline(ss, level, ',') || !std::getline(ss, p0, ',') ||
            !std::getline(ss, p1)) {
            throw SchemaError("bad target-joint row '" + line + "' (expected level,p0,p1)");
        }
        joint.level_names.push_back(trim(level));
        try {
            joint.probs.push_back({std::stod(trim(p0)), std::stod(trim(p1))});
        } catch (const std::exception&) {
            throw SchemaError("bad probability in target-joint row '" + line + "'");
        }
    }
    joint.validate();
    return joint;
}

void TargetJoint::save(const std::string& path) const {
    validate();
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write '" + path + "'");
    out << "level,p_control,p_case\n";
    for (std::size_t j = 0; j < level_names.size(); ++j) {
        out << level_names[j] << ',' << fmt17(probs[j][0]) << ',' << fmt17(probs[j][1]) << '\n';
    }
}

std::vector<std::size_t> largest_remainder_counts(std::span<const double> probs,
                                                  std::size_t total) {
    double sum = 0.0;
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0) throw NumericError("invalid probability");
        sum += p;
    }
    if (sum <= 0.0) throw NumericError("probabilities sum to zero");
    std::vector<std::size_t> counts(probs.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        const double exact = static_cast<double>(total) * probs[j] / sum;
        counts[j] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[j];
        remainders.push_back({exact - std::floor(exact), j});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) {
        counts[remainders[k % remainders.size()].second] += 1;
    }
    return counts;
}

NullDistribution baseline_null(const TargetJoint& target, const Dataset& ds,
                               const LearnerSpec& learner, MetricKind metric,
                               const BaselineOptions& opts) {
    target.validate();
    ds.validate();
    if (opts.test_size < 2) throw SchemaError("baseline test size must be >= 2");
    const std::size_t train_size =
        opts.train_size > 0 ? opts.train_size : 3 * opts.test_size;

    // map target levels onto dataset levels by name
    std::vector<int> ds_level(target.level_count(), -1);
    for (std::size_t j = 0; j < target.level_count(); ++j) {
        for (int l = 0; l < ds.level_count(); ++l) {
            if (ds.confounder.names[l] == target.level_names[j]) {
                ds_level[j] = l;
                break;
            }
        }
        if (ds_level[j] < 0) {
            throw SchemaError("target level '" + target.level_names[j] +
                              "' not present in the development data");
        }
    }

    std::vector<double> flat;
    for (const auto& row : target.probs) {
        flat.push_back(row[0]);
        flat.push_back(row[1]);
    }
    const std::vector<std::size_t> test_counts = largest_remainder_counts(flat, opts.test_size);
    const std::vector<std::size_t> train_counts = largest_remainder_counts(flat, train_size);

    // available development samples per (level, label) cell
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(ds.level_count()) * 2);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        members[ds.confounder.index[i] * 2 + ds.labels[i]].push_back(i);
    }

    Rng rng(derive_seed(opts.seed, 0x62617365ULL));  // stream tag "base"
    std::vector<std::size_t> subsample;
    std::vector<std::size_t> test_rows;
    std::vector<std::size_t> train_rows;
    for (std::size_t j = 0; j < target.level_count(); ++j) {
        for (int lab = 0; lab < 2; ++lab) {
            const std::size_t need_test = test_counts[j * 2 + lab];
            const std::size_t need_train = train_counts[j * 2 + lab];
            if (need_test + need_train == 0) continue;
            auto& cell = members[static_cast<std::size_t>(ds_level[j]) * 2 + lab];
            if (cell.size() < need_test + need_train) {
                throw InfeasibleError(
                    "cell (" + target.level_names[j] + ", label " + std::to_string(lab) +
                    ") has " + std::to_string(cell.size()) + " samples; baseline needs " +
                    std::to_string(need_test + need_train));
            }
            for (std::size_t k = 0; k < need_test + need_train; ++k) {
                const std::size_t pick = k + rng.below(cell.size() - k);
                std::swap(cell[k], cell[pick]);
            }
            for (std::size_t k = 0; k < need_test; ++k) test_rows.push_back(cell[k]);
            for (std::size_t k = 0; k < need_train; ++k) {
                train_rows.push_back(cell[need_test + k]);
            }
        }
    }
    std::sort(test_rows.begin(), test_rows.end());
    std::sort(train_rows.begin(), train_rows.end());
    subsample = train_rows;
    subsample.insert(subsample.end(), test_rows.begin(), test_rows.end());

    const Dataset sub = ds.subset(subsample);
    SplitIndices split;
    for (std::size_t k = 0; k < train_rows.size(); ++k) split.train.push_back(k);
    for (std::size_t k = 0; k < test_rows.size(); ++k) {
        split.test.push_back(train_rows.size() + k);
    }

    PermutationOptions popts;
    popts.iterations = opts.iterations;
    popts.seed = derive_seed(opts.seed, 0x6e756c6cULL);  // stream tag "null"
    popts.threads = opts.threads;
    NullDistribution nd =
        permutation_null(learner, sub, split, metric, NullScheme::restricted, popts);
    nd.scheme = NullScheme::baseline;
    return nd;
}

ReferenceBlock make_reference_block(ReferenceKind kind, const NullSummary& reference,
                                    double observed, const NullSummary& restricted,
                                    std::size_t test_size) {
    ReferenceBlock block;
    block.kind = kind;
    block.summary = reference;
    block.unconfounded = unconfounded_metric(observed, restricted, reference);
    block.p_value = confounding_pvalue(restricted, reference, test_size);
    return block;
}

void ConfoundingReport::write(std::ostream& out) const {
    out << "[run]\n";
    out << "format = confound-report/1\n";
    out << "metric = " << metric_name(metric) << "\n";
    out << "learner = " << learner_name(learner) << "\n";
    out << "permutations = " << iterations << "\n";
    out << "seed = " << seed << "\n";
    out << "test_size = " << test_size << "\n";
    if (metric == MetricKind::auc) {
        out << "test_negatives = " << n_negative << "\n";
        out << "test_positives = " << n_positive << "\n";
    }
    out << "\n[observed]\n";
    out << "metric_value = " << fmt6(observed) << "\n";
    out << "\n[restricted-null]\n";
    out << "mean = " << fmt6(restricted.mean) << "\n";
    out << "sd = " << fmt6(restricted.sd) << "\n";
    out << "samples = " << restricted.count << "\n";

    auto write_block = [&](const ReferenceBlock& block) {
        out << "\n[reference " << reference_name(block.kind) << "]\n";
        out << "mean = " << fmt6(block.summary.mean) << "\n";
        out << "sd = " << fmt6(block.summary.sd) << "\n";
        if (block.summary.count > 0) out << "samples = " << block.summary.count << "\n";
        out << "unconfounded_estimate = " << fmt6(block.unconfounded) << "\n";
        out << "confounding_pvalue = " << fmt6(block.p_value) << "\n";
    };
    write_block(primary);
    if (analytic_comparison && analytic_comparison->kind != primary.kind) {
        write_block(*analytic_comparison);
    }
}

std::string ConfoundingReport::summary_header() {
    return "metric\tlearner\tobserved\tunconfounded\tpvalue\trestricted_mean\trestricted_sd\t"
           "reference\treference_mean\treference_sd\ttest_size\tn_negative\tn_positive\tb\tseed";
}

std::string ConfoundingReport::summary_line() const {
    std::ostringstream out;
    out << metric_name(metric) << '\t' << learner_name(learner) << '\t' << fmt17(observed) << '\t'
        << fmt17(primary.unconfounded) << '\t' << fmt17(primary.p_value) << '\t'
        << fmt17(restricted.mean) << '\t' << fmt17(restricted.sd) << '\t'
        << reference_name(primary.kind) << '\t' << fmt17(primary.summary.mean) << '\t'
        << fmt17(primary.summary.sd) << '\t' << test_size << '\t' << n_negative << '\t'
        << n_positive << '\t' << iterations << '\t' << seed;
    return out.str();
}

}  // namespace confound
