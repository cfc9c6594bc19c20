#include "confound/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "confound/errors.hpp"
#include "confound/rng.hpp"

namespace confound {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(trim(cur));
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Heuristic guard for the "continuous confounder without a discretization
// spec" contract: all-numeric columns with many distinct values are refused.
constexpr std::size_t kMaxCategoricalLevels = 12;

}  // namespace

Levels Levels::from_strings(std::span<const std::string> values) {
    Levels out;
    out.index.reserve(values.size());
    std::unordered_map<std::string, int> seen;
    for (const auto& v : values) {
        auto it = seen.find(v);
        if (it == seen.end()) {
            it = seen.emplace(v, static_cast<int>(out.names.size())).first;
            out.names.push_back(v);
        }
        out.index.push_back(it->second);
    }
    return out;
}

void Levels::validate() const {
    const int k = level_count();
    std::vector<bool> used(k, false);
    for (int v : index) {
        if (v < 0 || v >= k) throw SchemaError("confounder index out of range");
        used[v] = true;
    }
    for (int l = 0; l < k; ++l) {
        if (!used[l]) throw SchemaError("confounder level '" + names[l] + "' unused");
    }
}

void Dataset::validate() const {
    const std::size_t n = labels.size();
    if (n == 0) throw SchemaError("dataset is empty");
    if (features.rows != n) throw SchemaError("feature row count mismatch");
    if (features.cols == 0) throw SchemaError("dataset has no feature columns");
    if (confounder.size() != n) throw SchemaError("confounder length mismatch");
    if (weights.size() != n) throw SchemaError("weight length mismatch");
    if (feature_names.size() != features.cols) throw SchemaError("feature name count mismatch");
    for (int y : labels) {
        if (y != 0 && y != 1) throw SchemaError("invalid label (must be 0 or 1)");
    }
    for (double x : features.values) {
        if (!std::isfinite(x)) throw SchemaError("non-finite feature value");
    }
    confounder.validate();
    double wmax = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) throw SchemaError("weights must be finite and >= 0");
        wmax = std::max(wmax, w);
    }
    if (wmax == 0.0) throw SchemaError("all weights are zero");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.features = Matrix(rows.size(), features.cols);
    out.labels.reserve(rows.size());
    out.weights.reserve(rows.size());
    std::vector<std::string> level_values;
    level_values.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::size_t i = rows[k];
        std::copy(features.row(i).begin(), features.row(i).end(), out.features.row(k).begin());
        out.labels.push_back(labels[i]);
        out.weights.push_back(weights[i]);
        level_values.push_back(confounder.name_of(i));
    }
    out.confounder = Levels::from_strings(level_values);
    out.feature_names = feature_names;
    out.label_name = label_name;
    out.confounder_name = confounder_name;
    out.has_weight_column = has_weight_column;
    out.weight_name = weight_name;
    return out;
}

void SplitIndices::validate(std::size_t n) const {
    if (train.empty() || test.empty()) throw SchemaError("split has an empty side");
    std::vector<char> seen(n, 0);
    for (std::size_t i : train) {
        if (i >= n || seen[i]) throw SchemaError("invalid train index");
        seen[i] = 1;
    }
    for (std::size_t i : test) {
        if (i >= n || seen[i]) throw SchemaError("train/test overlap or invalid test index");
        seen[i] = 1;
    }
}

std::string Interval::name() const {
    auto fmt = [](double v) {
        if (v == std::floor(v) && std::abs(v) < 1e15) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.0f", v);
            return std::string(buf);
        }
        return format_double(v);
    };
    return fmt(lo) + ":" + fmt(hi);
}

DiscretizationSpec DiscretizationSpec::parse(const std::string& text) {
    DiscretizationSpec spec;
    for (const auto& part : split_fields(text, ',')) {
        const auto sep = part.find(':');
        if (sep == std::string::npos) {
            throw SchemaError("bad interval '" + part + "' (expected lo:hi)");
        }
        Interval iv;
        if (!parse_double(trim(part.substr(0, sep)), iv.lo) ||
            !parse_double(trim(part.substr(sep + 1)), iv.hi)) {
            throw SchemaError("bad interval bounds in '" + part + "'");
        }
        spec.cut_ranges.push_back(iv);
    }
    spec.validate();
    return spec;
}

void DiscretizationSpec::validate() const {
    if (cut_ranges.empty()) throw SchemaError("discretization has no intervals");
    for (std::size_t i = 0; i < cut_ranges.size(); ++i) {
        if (cut_ranges[i].lo > cut_ranges[i].hi) {
            throw SchemaError("interval " + cut_ranges[i].name() + " is empty");
        }
        if (i > 0 && cut_ranges[i].lo <= cut_ranges[i - 1].hi) {
            throw SchemaError("intervals overlap or are out of order near " + cut_ranges[i].name());
        }
    }
}

void CsvSchema::validate() const {
    if (label.empty()) throw SchemaError("schema: label column not named");
    if (confounders.empty()) throw SchemaError("schema: no confounder column named");
}

Levels discretize(std::span<const double> values, const DiscretizationSpec& spec) {
    spec.validate();
    Levels out;
    out.index.reserve(values.size());
    // Level indices still follow first appearance; names come from intervals.
    std::vector<int> assigned(spec.cut_ranges.size(), -1);
    for (double v : values) {
        int hit = -1;
        for (std::size_t k = 0; k < spec.cut_ranges.size(); ++k) {
            if (spec.cut_ranges[k].contains(v)) {
                hit = static_cast<int>(k);
                break;
            }
        }
        if (hit < 0) {
            throw SchemaError("value " + format_double(v) + " outside all discretization intervals");
        }
        if (assigned[hit] < 0) {
            assigned[hit] = static_cast<int>(out.names.size());
            out.names.push_back(spec.cut_ranges[hit].name());
        }
        out.index.push_back(assigned[hit]);
    }
    return out;
}

Levels combine_confounders(const Levels& a, const Levels& b) {
    if (a.size() != b.size()) throw SchemaError("combine_confounders: length mismatch");
    Levels out;
    out.index.reserve(a.size());
    std::unordered_map<long long, int> seen;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const long long key =
            static_cast<long long>(a.index[i]) * (b.level_count() + 1) + b.index[i];
        auto it = seen.find(key);
        if (it == seen.end()) {
            it = seen.emplace(key, static_cast<int>(out.names.size())).first;
            out.names.push_back(a.names[a.index[i]] + "/" + b.names[b.index[i]]);
        }
        out.index.push_back(it->second);
    }
    return out;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    schema.validate();
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw SchemaError("'" + path + "' is empty");
    const std::vector<std::string> header = split_fields(line, ',');

    std::unordered_map<std::string, std::size_t> col_of;
    for (std::size_t c = 0; c < header.size(); ++c) col_of[header[c]] = c;
    auto require = [&](const std::string& name) {
        auto it = col_of.find(name);
        if (it == col_of.end()) {
            throw SchemaError("column '" + name + "' missing from '" + path + "'");
        }
        return it->second;
    };

    const std::size_t label_col = require(schema.label);
    std::vector<std::size_t> conf_cols;
    for (const auto& c : schema.confounders) conf_cols.push_back(require(c));
    std::size_t weight_col = header.size();
    if (!schema.weight.empty()) weight_col = require(schema.weight);

    std::vector<std::string> feature_cols = schema.features;
    if (feature_cols.empty()) {
        for (const auto& name : header) {
            if (name == schema.label || name == schema.weight) continue;
            if (std::find(schema.confounders.begin(), schema.confounders.end(), name) !=
                schema.confounders.end()) {
                continue;
            }
            feature_cols.push_back(name);
        }
        if (feature_cols.empty()) throw SchemaError("no feature columns left in '" + path + "'");
    }
    std::vector<std::size_t> feat_cols;
    for (const auto& c : feature_cols) feat_cols.push_back(require(c));

    std::vector<std::vector<double>> feature_rows;
    std::vector<int> labels;
    std::vector<double> weights;
    std::vector<std::vector<std::string>> conf_values(conf_cols.size());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split_fields(line, ',');
        if (cells.size() != header.size()) {
            throw SchemaError(path + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " fields, got " +
                              std::to_string(cells.size()));
        }
        const std::string& lab = cells[label_col];
        if (lab == "0") {
            labels.push_back(0);
        } else if (lab == "1") {
            labels.push_back(1);
        } else {
            throw SchemaError(path + ":" + std::to_string(line_no) + ": invalid label '" + lab +
                              "' (must be 0 or 1)");
        }
        std::vector<double> row(feat_cols.size());
        for (std::size_t j = 0; j < feat_cols.size(); ++j) {
            if (!parse_double(cells[feat_cols[j]], row[j])) {
                throw SchemaError(path + ":" + std::to_string(line_no) + ": non-numeric value '" +
                                  cells[feat_cols[j]] + "' in feature column '" + feature_cols[j] +
                                  "'");
            }
        }
        feature_rows.push_back(std::move(row));
        for (std::size_t j = 0; j < conf_cols.size(); ++j) {
            conf_values[j].push_back(cells[conf_cols[j]]);
        }
        if (weight_col < header.size()) {
            double w;
            if (!parse_double(cells[weight_col], w) || w < 0.0) {
                throw SchemaError(path + ":" + std::to_string(line_no) + ": invalid weight '" +
                                  cells[weight_col] + "'");
            }
            weights.push_back(w);
        }
    }
    if (labels.empty()) throw SchemaError("'" + path + "' has a header but no data rows");

    // Each confounder column becomes a Levels vector: via the discretization
    // spec when one is configured, otherwise categorically. Continuous-looking
    // columns without a spec are refused.
    std::vector<Levels> conf_levels;
    for (std::size_t j = 0; j < conf_cols.size(); ++j) {
        const std::string& name = schema.confounders[j];
        auto spec_it = schema.discretize.find(name);
        if (spec_it != schema.discretize.end()) {
            std::vector<double> numeric(conf_values[j].size());
            for (std::size_t i = 0; i < numeric.size(); ++i) {
                if (!parse_double(conf_values[j][i], numeric[i])) {
                    throw SchemaError("confounder '" + name + "' has non-numeric value '" +
                                      conf_values[j][i] + "' but a discretization is configured");
                }
            }
            conf_levels.push_back(discretize(numeric, spec_it->second));
        } else {
            Levels lv = Levels::from_strings(conf_values[j]);
            if (lv.names.size() > kMaxCategoricalLevels) {
                bool all_numeric = true;
                double tmp;
                for (const auto& v : lv.names) {
                    if (!parse_double(v, tmp)) {
                        all_numeric = false;
                        break;
                    }
                }
                if (all_numeric) {
                    throw SchemaError("confounder '" + name +
                                      "' looks continuous; supply discretization cut points");
                }
            }
            conf_levels.push_back(std::move(lv));
        }
    }

    Dataset ds;
    ds.features = Matrix(feature_rows.size(), feat_cols.size());
    for (std::size_t i = 0; i < feature_rows.size(); ++i) {
        std::copy(feature_rows[i].begin(), feature_rows[i].end(), ds.features.row(i).begin());
    }
    ds.labels = std::move(labels);
    ds.confounder = conf_levels[0];
    ds.confounder_name = schema.confounders[0];
    for (std::size_t j = 1; j < conf_levels.size(); ++j) {
        ds.confounder = combine_confounders(ds.confounder, conf_levels[j]);
        ds.confounder_name += "/" + schema.confounders[j];
    }
    ds.feature_names = feature_cols;
    ds.label_name = schema.label;
    if (weight_col < header.size()) {
        ds.weights = std::move(weights);
        ds.has_weight_column = true;
        ds.weight_name = schema.weight;
    } else {
        ds.weights.assign(ds.labels.size(), 1.0);
    }
    ds.validate();
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write '" + path + "'");
    for (std::size_t j = 0; j < ds.feature_names.size(); ++j) {
        out << ds.feature_names[j] << ',';
    }
    out << ds.label_name << ',' << ds.confounder_name;
    if (ds.has_weight_column) out << ',' << ds.weight_name;
    out << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (double x : ds.features.row(i)) out << format_double(x) << ',';
        out << ds.labels[i] << ',' << ds.confounder.name_of(i);
        if (ds.has_weight_column) out << ',' << format_double(ds.weights[i]);
        out << '\n';
    }
}

SplitIndices stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    ds.validate();
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw SchemaError("test_fraction must lie in (0,1)");
    }
    const int k = ds.level_count();
    std::vector<std::vector<std::size_t>> cells(static_cast<std::size_t>(k) * 2);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        cells[ds.confounder.index[i] * 2 + ds.labels[i]].push_back(i);
    }
    SplitIndices split;
    Rng rng(derive_seed(seed, 0x73706c6974ULL));  // stream tag "split"
    for (int level = 0; level < k; ++level) {
        for (int lab = 0; lab < 2; ++lab) {
            auto& cell = cells[level * 2 + lab];
            if (cell.size() < 2) {
                throw InfeasibleError("cell (" + ds.confounder.names[level] + ", label " +
                                      std::to_string(lab) + ") has " +
                                      std::to_string(cell.size()) +
                                      " samples; need at least 2 to split");
            }
            // round half-up, then repair so both sides keep >= 1
            std::size_t take = static_cast<std::size_t>(
                std::floor(static_cast<double>(cell.size()) * test_fraction + 0.5));
            take = std::max<std::size_t>(1, std::min(take, cell.size() - 1));
            // partial Fisher-Yates: first `take` entries become the test draw
            for (std::size_t j = 0; j < take; ++j) {
                const std::size_t pick = j + rng.below(cell.size() - j);
                std::swap(cell[j], cell[pick]);
            }
            split.test.insert(split.test.end(), cell.begin(), cell.begin() + take);
            split.train.insert(split.train.end(), cell.begin() + take, cell.end());
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

std::pair<Dataset, SplitIndices> concat_as_split(const Dataset& train, const Dataset& test) {
    train.validate();
    test.validate();
    if (train.feature_names != test.feature_names || train.label_name != test.label_name) {
        throw SchemaError("train and test column roles differ");
    }
    const std::size_t n = train.size() + test.size();
    Dataset ds;
    ds.features = Matrix(n, train.feature_count());
    std::vector<std::string> level_values;
    level_values.reserve(n);
    auto append = [&](const Dataset& part, std::size_t offset) {
        for (std::size_t i = 0; i < part.size(); ++i) {
            std::copy(part.features.row(i).begin(), part.features.row(i).end(),
                      ds.features.row(offset + i).begin());
            ds.labels.push_back(part.labels[i]);
            ds.weights.push_back(part.weights[i]);
            level_values.push_back(part.confounder.name_of(i));
        }
    };
    ds.labels.reserve(n);
    ds.weights.reserve(n);
    append(train, 0);
    append(test, train.size());
    ds.confounder = Levels::from_strings(level_values);
    ds.feature_names = train.feature_names;
    ds.label_name = train.label_name;
    ds.confounder_name = train.confounder_name;
    ds.has_weight_column = train.has_weight_column || test.has_weight_column;
    ds.weight_name = train.weight_name;

    SplitIndices split;
    for (std::size_t i = 0; i < train.size(); ++i) split.train.push_back(i);
    for (std::size_t i = 0; i < test.size(); ++i) split.test.push_back(train.size() + i);
    return {std::move(ds), std::move(split)};
}

}  // namespace confound
