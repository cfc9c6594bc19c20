#include "confound/adjustment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "confound/errors.hpp"
#include "confound/rng.hpp"

namespace confound {

PropensityScores PropensityScores::from_scores(std::vector<double> raw, double clip) {
    if (!(clip > 0.0 && clip < 0.5)) throw SchemaError("propensity clip must lie in (0, 0.5)");
    for (double& s : raw) {
        if (!std::isfinite(s)) throw NumericError("non-finite propensity score");
        s = std::clamp(s, clip, 1.0 - clip);
    }
    PropensityScores ps;
    ps.scores = std::move(raw);
    return ps;
}

double BalanceTable::total() const {
    double t = 0.0;
    for (const auto& r : rows) t += r.negatives + r.positives;
    return t;
}

double BalanceTable::max_imbalance() const {
    double cases = 0.0;
    const double all = total();
    for (const auto& r : rows) cases += r.positives;
    const double overall = all > 0.0 ? cases / all : 0.0;
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, std::abs(r.case_fraction - overall));
    return worst;
}

void BalanceTable::write(std::ostream& out) const {
    out << "level\tnegatives\tpositives\tcase_fraction\n";
    char buf[40];
    for (const auto& r : rows) {
        auto fmt = [&](double v) {
            std::snprintf(buf, sizeof(buf), "%.6g", v);
            return std::string(buf);
        };
        out << r.level << '\t' << fmt(r.negatives) << '\t' << fmt(r.positives) << '\t'
            << fmt(r.case_fraction) << '\n';
    }
}

std::vector<std::size_t> match_exact(const Dataset& ds, std::uint64_t seed) {
    ds.validate();
    const int k = ds.level_count();
    std::vector<std::vector<std::size_t>> by_cell(static_cast<std::size_t>(k) * 2);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        by_cell[ds.confounder.index[i] * 2 + ds.labels[i]].push_back(i);
    }
    Rng rng(derive_seed(seed, 0x6d617463ULL));  // stream tag "matc"
    std::vector<std::size_t> kept;
    for (int level = 0; level < k; ++level) {
        auto& controls = by_cell[level * 2];
        auto& cases = by_cell[level * 2 + 1];
        if (controls.empty() || cases.empty()) continue;  // stratum dropped
        const std::size_t take = std::min(controls.size(), cases.size());
        for (auto* side : {&controls, &cases}) {
            auto& pool = *side;
            for (std::size_t j = 0; j < take && j < pool.size(); ++j) {
                const std::size_t pick = j + rng.below(pool.size() - j);
                std::swap(pool[j], pool[pick]);
            }
            kept.insert(kept.end(), pool.begin(), pool.begin() + take);
        }
    }
    if (kept.empty()) throw InfeasibleError("no confounder level retains both classes");
    std::sort(kept.begin(), kept.end());
    return kept;
}

namespace {

void require_both_classes(std::span<const int> labels) {
    std::size_t ones = 0;
    for (int y : labels) ones += y;
    if (ones == 0 || ones == labels.size()) {
        throw NumericError("propensity estimation needs both classes");
    }
}

}  // namespace

PropensityScores estimate_propensity(const Levels& confounder, std::span<const int> labels,
                                     const LogisticConfig& cfg) {
    if (confounder.size() != labels.size()) throw SchemaError("propensity input length mismatch");
    require_both_classes(labels);
    const std::size_t n = labels.size();
    const int k = confounder.level_count();
    // one-hot indicators for levels 1..K-1; level 0 is the reference
    Matrix x(n, static_cast<std::size_t>(std::max(k - 1, 1)), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const int level = confounder.index[i];
        if (level > 0) x(i, level - 1) = 1.0;
    }
    const std::vector<double> w(n, 1.0);
    const LearnerModel model = fit_logistic(x, labels, w, cfg);
    PropensityScores ps = PropensityScores::from_scores(predict_proba(model, x));
    ps.model = model;
    return ps;
}

PropensityScores estimate_propensity_linear(std::span<const double> covariate,
                                            std::span<const int> labels,
                                            const LogisticConfig& cfg) {
    if (covariate.size() != labels.size()) throw SchemaError("propensity input length mismatch");
    require_both_classes(labels);
    Matrix x(covariate.size(), 1);
    for (std::size_t i = 0; i < covariate.size(); ++i) x(i, 0) = covariate[i];
    const std::vector<double> w(covariate.size(), 1.0);
    const LearnerModel model = fit_logistic(x, labels, w, cfg);
    PropensityScores ps = PropensityScores::from_scores(predict_proba(model, x));
    ps.model = model;
    return ps;
}

IpwMode parse_ipw_mode(const std::string& name) {
    if (name == "weights") return IpwMode::weights;
    if (name == "resample") return IpwMode::resample;
    throw SchemaError("unknown IPW mode '" + name + "'");
}

std::vector<double> ipw_weights(const Dataset& ds, const PropensityScores& ps) {
    ds.validate();
    if (ps.scores.size() != ds.size()) throw SchemaError("propensity score length mismatch");
    const std::size_t n = ds.size();
    std::vector<double> ipw(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = ps.scores[i];
        if (!(p > 0.0 && p < 1.0)) throw NumericError("propensity score outside (0,1)");
        ipw[i] = ds.weights[i] * (ds.labels[i] == 1 ? 1.0 / p : 1.0 / (1.0 - p));
    }
    const double mean = std::accumulate(ipw.begin(), ipw.end(), 0.0) / static_cast<double>(n);
    for (double& w : ipw) w /= mean;
    return ipw;
}

std::vector<std::size_t> ipw_resample_rows(const Dataset& ds, const PropensityScores& ps,
                                           std::uint64_t seed, std::size_t resample_size) {
    const std::vector<double> ipw = ipw_weights(ds, ps);
    const std::size_t n = ds.size();
    const std::size_t m = resample_size > 0 ? resample_size : n;
    std::vector<double> cumulative(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += ipw[i];
        cumulative[i] = acc;
    }
    Rng rng(derive_seed(seed, 0x69707772ULL));  // stream tag "ipwr"
    std::vector<std::size_t> rows(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double u = rng.next_double() * acc;
        rows[i] = static_cast<std::size_t>(
            std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        if (rows[i] >= n) rows[i] = n - 1;
    }
    return rows;
}

Dataset ipw_augment(const Dataset& ds, const PropensityScores& ps, IpwMode mode,
                    std::uint64_t seed, std::size_t resample_size) {
    if (mode == IpwMode::weights) {
        Dataset out = ds;
        out.weights = ipw_weights(ds, ps);
        out.has_weight_column = true;
        return out;
    }
    const std::vector<std::size_t> rows = ipw_resample_rows(ds, ps, seed, resample_size);
    Dataset out = ds.subset(rows);
    out.weights.assign(rows.size(), 1.0);
    out.has_weight_column = false;
    return out;
}

BalanceTable balance_table(const Dataset& ds) {
    ds.validate();
    BalanceTable table;
    table.rows.resize(ds.level_count());
    for (int l = 0; l < ds.level_count(); ++l) table.rows[l].level = ds.confounder.names[l];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto& row = table.rows[ds.confounder.index[i]];
        (ds.labels[i] == 1 ? row.positives : row.negatives) += ds.weights[i];
    }
    for (auto& row : table.rows) {
        const double total = row.positives + row.negatives;
        row.case_fraction = total > 0.0 ? row.positives / total : 0.0;
    }
    return table;
}

}  // namespace confound
