#include "confound/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "confound/adjustment.hpp"
#include "confound/errors.hpp"
#include "confound/permutation.hpp"
#include "confound/rng.hpp"
#include "confound/simulation.hpp"

namespace confound {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write '" + path.string() + "'");
    return out;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Raw CSV lines aligned with the rows load_csv produces. The split and
// adjust commands emit selected input lines verbatim so their outputs keep
// the caller's schema and re-enter the pipeline with the same config.
struct CsvRows {
    std::string header;
    std::vector<std::string> lines;
};

CsvRows read_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open '" + path + "'");
    CsvRows rows;
    if (!std::getline(in, rows.header)) throw SchemaError("'" + path + "' is empty");
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        rows.lines.push_back(line);
    }
    return rows;
}

void write_rows(const fs::path& path, const CsvRows& rows,
                std::span<const std::size_t> indices) {
    auto out = open_out(path);
    out << rows.header << '\n';
    for (std::size_t i : indices) out << rows.lines[i] << '\n';
}

// Emits the rows with a weight column holding `weights`; replaces the column
// named `weight_column` when the input already carries one, appends a new
// "weight" column otherwise.
void write_rows_with_weights(const fs::path& path, const CsvRows& rows,
                             std::span<const double> weights,
                             const std::string& weight_column) {
    auto out = open_out(path);
    long long replace_at = -1;
    if (!weight_column.empty()) {
        std::stringstream header(rows.header);
        std::string cell;
        long long idx = 0;
        while (std::getline(header, cell, ',')) {
            if (trim(cell) == weight_column) replace_at = idx;
            ++idx;
        }
    }
    out << rows.header << (replace_at < 0 ? ",weight" : "") << '\n';
    for (std::size_t i = 0; i < rows.lines.size(); ++i) {
        if (replace_at < 0) {
            out << rows.lines[i] << ',' << fmt17(weights[i]) << '\n';
        } else {
            std::stringstream line(rows.lines[i]);
            std::string cell;
            long long idx = 0;
            bool first = true;
            while (std::getline(line, cell, ',')) {
                if (!first) out << ',';
                out << (idx == replace_at ? fmt17(weights[i]) : cell);
                first = false;
                ++idx;
            }
            out << '\n';
        }
    }
}

// Re-reads one numeric column from a CSV, iterating rows exactly as load_csv
// does so the values align with the loaded Dataset.
std::vector<double> read_numeric_column(const std::string& path, const std::string& column) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("'" + path + "' is empty");
    std::stringstream header(line);
    std::string cell;
    long long target = -1;
    long long idx = 0;
    while (std::getline(header, cell, ',')) {
        if (trim(cell) == column) target = idx;
        ++idx;
    }
    if (target < 0) throw SchemaError("column '" + column + "' missing from '" + path + "'");
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::stringstream row(line);
        long long col = 0;
        std::string found;
        while (std::getline(row, cell, ',')) {
            if (col == target) found = trim(cell);
            ++col;
        }
        char* end = nullptr;
        const double v = std::strtod(found.c_str(), &end);
        if (found.empty() || end != found.c_str() + found.size()) {
            throw SchemaError("column '" + column + "' has non-numeric value '" + found + "'");
        }
        values.push_back(v);
    }
    return values;
}

}  // namespace

CsvSchema RunConfig::schema() const {
    CsvSchema schema;
    schema.label = file.get("label");
    schema.features = split_list(file.get_or("features", ""));
    schema.confounders = split_list(file.get("confounders"));
    schema.weight = file.get_or("weight", "");
    for (const auto& column : file.keys_with_prefix("discretize")) {
        schema.discretize[column] = DiscretizationSpec::parse(file.get("discretize." + column));
    }
    schema.validate();
    return schema;
}

LearnerSpec RunConfig::learner_spec() const {
    LearnerSpec spec;
    spec.kind = parse_learner(learner.value_or(file.get_or("learner", "logistic")));
    spec.logistic.max_iterations =
        static_cast<int>(file.get_int("logistic.max_iterations", spec.logistic.max_iterations));
    spec.logistic.tolerance = file.get_double("logistic.tolerance", spec.logistic.tolerance);
    spec.logistic.ridge = file.get_double("logistic.ridge", spec.logistic.ridge);
    spec.forest.n_trees = static_cast<int>(file.get_int("forest.trees", spec.forest.n_trees));
    spec.forest.max_depth =
        static_cast<int>(file.get_int("forest.max_depth", spec.forest.max_depth));
    spec.forest.min_leaf = static_cast<int>(file.get_int("forest.min_leaf", spec.forest.min_leaf));
    spec.forest.features_per_split =
        static_cast<int>(file.get_int("forest.mtry", spec.forest.features_per_split));
    spec.forest.seed = static_cast<std::uint64_t>(file.get_int("forest.seed", 0));
    return spec;
}

MetricKind RunConfig::metric_kind() const {
    return parse_metric(metric.value_or(file.get_or("metric", "auc")));
}

std::uint64_t RunConfig::seed_value() const {
    if (seed) return *seed;
    auto v = file.find("seed");
    if (!v) throw SchemaError("a seed is required (--seed or config key 'seed')");
    return static_cast<std::uint64_t>(std::stoull(*v));
}

int RunConfig::permutation_count() const {
    const int b = permutations.value_or(static_cast<int>(file.get_int("b", 1000)));
    if (b < 1) throw SchemaError("permutation count b must be >= 1");
    return b;
}

int RunConfig::thread_count() const {
    const int t = threads.value_or(static_cast<int>(file.get_int("threads", 1)));
    if (t < 1) throw SchemaError("threads must be >= 1");
    return t;
}

double RunConfig::test_fraction() const {
    const double f = file.get_double("test_fraction", 0.25);
    if (!(f > 0.0 && f < 1.0)) throw SchemaError("test_fraction must lie in (0,1)");
    return f;
}

void cmd_split(const RunConfig& cfg) {
    if (cfg.input_path.empty()) throw SchemaError("split needs --input");
    const Dataset ds = load_csv(cfg.input_path, cfg.schema());
    const double fraction = cfg.test_fraction();
    const std::uint64_t seed = cfg.seed_value();
    const SplitIndices split = stratified_split(ds, fraction, seed);

    fs::create_directories(cfg.out_dir);
    const CsvRows rows = read_rows(cfg.input_path);
    write_rows(fs::path(cfg.out_dir) / "train.csv", rows, split.train);
    write_rows(fs::path(cfg.out_dir) / "test.csv", rows, split.test);

    auto manifest = open_out(fs::path(cfg.out_dir) / "split_manifest.txt");
    manifest << "[split]\n";
    manifest << "input = " << cfg.input_path << "\n";
    manifest << "seed = " << seed << "\n";
    manifest << "test_fraction = " << fmt17(fraction) << "\n";
    manifest << "rows = " << ds.size() << "\n";
    manifest << "train_rows = " << split.train.size() << "\n";
    manifest << "test_rows = " << split.test.size() << "\n";
    manifest << "\n[cells]\n";
    manifest << "level\tlabel\ttotal\ttest\n";
    for (int level = 0; level < ds.level_count(); ++level) {
        for (int lab = 0; lab < 2; ++lab) {
            std::size_t total = 0, test = 0;
            for (std::size_t i = 0; i < ds.size(); ++i) {
                if (ds.confounder.index[i] == level && ds.labels[i] == lab) ++total;
            }
            for (std::size_t i : split.test) {
                if (ds.confounder.index[i] == level && ds.labels[i] == lab) ++test;
            }
            manifest << ds.confounder.names[level] << '\t' << lab << '\t' << total << '\t' << test
                     << "\n";
        }
    }
}

namespace {

void write_reentry_schema(const RunConfig& cfg, const CsvSchema& schema, bool weight_added,
                          const fs::path& dir) {
    auto out = open_out(dir / "schema.conf");
    out << "label = " << schema.label << "\n";
    std::string confounders;
    for (std::size_t j = 0; j < schema.confounders.size(); ++j) {
        if (j) confounders += ",";
        confounders += schema.confounders[j];
    }
    out << "confounders = " << confounders << "\n";
    if (!schema.features.empty()) {
        std::string features;
        for (std::size_t j = 0; j < schema.features.size(); ++j) {
            if (j) features += ",";
            features += schema.features[j];
        }
        out << "features = " << features << "\n";
    }
    for (const auto& [column, spec] : schema.discretize) {
        out << "discretize." << column << " = " << cfg.file.get("discretize." + column) << "\n";
    }
    if (!schema.weight.empty()) {
        out << "weight = " << schema.weight << "\n";
    } else if (weight_added) {
        out << "weight = weight\n";
    }
    if (auto metric = cfg.file.find("metric")) out << "metric = " << *metric << "\n";
    if (auto learner = cfg.file.find("learner")) out << "learner = " << *learner << "\n";
}

}  // namespace

void cmd_adjust(const RunConfig& cfg) {
    if (cfg.train_path.empty() || cfg.test_path.empty()) {
        throw SchemaError("adjust needs --train and --test");
    }
    const std::string method = cfg.adjust ? *cfg.adjust : cfg.file.get("adjust");
    const std::uint64_t seed = cfg.seed_value();
    const CsvSchema schema = cfg.schema();
    const std::string propensity_column = cfg.file.get_or("propensity_column", "");
    const std::size_t resample_size =
        static_cast<std::size_t>(cfg.file.get_int("resample_size", 0));

    fs::create_directories(cfg.out_dir);
    auto balance_out = open_out(fs::path(cfg.out_dir) / "balance.txt");

    bool weight_added = false;
    const std::pair<std::string, std::string> parts[2] = {
        {cfg.train_path, "train"},
        {cfg.test_path, "test"},
    };
    for (const auto& [path, part] : parts) {
        const Dataset ds = load_csv(path, schema);
        const CsvRows rows = read_rows(path);
        const std::uint64_t part_seed = derive_seed(seed, part == "train" ? 1 : 2);
        const fs::path out_csv = fs::path(cfg.out_dir) / (part + "_adjusted.csv");

        Dataset adjusted;
        if (method == "match") {
            const std::vector<std::size_t> kept = match_exact(ds, part_seed);
            adjusted = ds.subset(kept);
            write_rows(out_csv, rows, kept);
        } else if (method == "ipw-weights" || method == "ipw-resample") {
            PropensityScores ps;
            if (!propensity_column.empty()) {
                const std::vector<double> covariate = read_numeric_column(path, propensity_column);
                ps = estimate_propensity_linear(covariate, ds.labels);
            } else {
                ps = estimate_propensity(ds.confounder, ds.labels);
            }
            if (method == "ipw-weights") {
                adjusted = ipw_augment(ds, ps, IpwMode::weights, part_seed);
                write_rows_with_weights(out_csv, rows, adjusted.weights, schema.weight);
                weight_added = weight_added || schema.weight.empty();
            } else {
                const std::vector<std::size_t> drawn =
                    ipw_resample_rows(ds, ps, part_seed, resample_size);
                adjusted = ds.subset(drawn);
                adjusted.weights.assign(drawn.size(), 1.0);
                write_rows(out_csv, rows, drawn);
            }
        } else {
            throw SchemaError("unknown adjustment '" + method +
                              "' (expected match, ipw-weights or ipw-resample)");
        }

        balance_out << "[" << part << " before]\n";
        balance_table(ds).write(balance_out);
        balance_out << "\n[" << part << " after]\n";
        balance_table(adjusted).write(balance_out);
        balance_out << "\n";
    }
    write_reentry_schema(cfg, schema, weight_added, cfg.out_dir);
}

ConfoundingReport cmd_analyze(const RunConfig& cfg) {
    if (cfg.train_path.empty() || cfg.test_path.empty()) {
        throw SchemaError("analyze needs --train and --test");
    }
    const CsvSchema schema = cfg.schema();
    const Dataset train = load_csv(cfg.train_path, schema);
    const Dataset test = load_csv(cfg.test_path, schema);
    auto [ds, split] = concat_as_split(train, test);

    const LearnerSpec learner = cfg.learner_spec();
    const MetricKind metric = cfg.metric_kind();
    const std::uint64_t seed = cfg.seed_value();
    const int b = cfg.permutation_count();
    const int threads = cfg.thread_count();

    fs::create_directories(cfg.out_dir);

    LearnerModel fitted;
    const double observed = evaluate_observed(learner, ds, split, metric, &fitted);
    save_model(fitted, (fs::path(cfg.out_dir) / "model.txt").string());

    PermutationOptions restricted_opts;
    restricted_opts.iterations = b;
    restricted_opts.seed = derive_seed(seed, 0x72657374ULL);  // stream tag "rest"
    restricted_opts.threads = threads;
    const NullDistribution restricted_null = permutation_null(
        learner, ds, split, metric, NullScheme::restricted, restricted_opts);
    write_samples_tsv(restricted_null, (fs::path(cfg.out_dir) / "null_restricted.tsv").string());
    const NullSummary restricted = summarize(restricted_null);

    std::size_t n_pos = 0;
    for (std::size_t i : split.test) n_pos += ds.labels[i];
    const std::size_t n_test = split.test.size();
    const std::size_t n_neg = n_test - n_pos;

    ConfoundingReport report;
    report.metric = metric;
    report.learner = learner.kind;
    report.observed = observed;
    report.restricted = restricted;
    report.test_size = n_test;
    report.n_negative = n_neg;
    report.n_positive = n_pos;
    report.iterations = b;
    report.seed = seed;

    const std::string reference_choice = cfg.file.get_or("reference", "empirical");
    if (!cfg.target_joint_path.empty()) {
        const TargetJoint target = TargetJoint::load(cfg.target_joint_path);
        BaselineOptions bopts;
        bopts.iterations = b;
        bopts.test_size = n_test;
        bopts.train_size =
            static_cast<std::size_t>(cfg.file.get_int("baseline.train_size", 0));
        bopts.seed = derive_seed(seed, 0x74617267ULL);  // stream tag "targ"
        bopts.threads = threads;
        const NullDistribution baseline = baseline_null(target, ds, learner, metric, bopts);
        write_samples_tsv(baseline, (fs::path(cfg.out_dir) / "null_baseline.tsv").string());
        report.primary = make_reference_block(ReferenceKind::baseline_target,
                                              summarize(baseline), observed, restricted, n_test);
    } else if (metric == MetricKind::auc && reference_choice == "analytic") {
        report.primary = make_reference_block(ReferenceKind::analytic_auc,
                                              analytic_auc_null(n_neg, n_pos), observed,
                                              restricted, n_test);
    } else if (reference_choice == "empirical" || reference_choice == "analytic") {
        PermutationOptions standard_opts;
        standard_opts.iterations = b;
        standard_opts.seed = derive_seed(seed, 0x7374616eULL);  // stream tag "stan"
        standard_opts.threads = threads;
        const NullDistribution standard_null = permutation_null(
            learner, ds, split, metric, NullScheme::standard, standard_opts);
        write_samples_tsv(standard_null, (fs::path(cfg.out_dir) / "null_standard.tsv").string());
        report.primary =
            make_reference_block(ReferenceKind::empirical_standard, summarize(standard_null),
                                 observed, restricted, n_test);
    } else {
        throw SchemaError("unknown reference '" + reference_choice +
                          "' (expected empirical or analytic)");
    }

    // Eq. 3 comparison block: reported for AUC whenever the headline
    // reference is something else, so the approximation can be eyeballed.
    if (metric == MetricKind::auc && report.primary.kind != ReferenceKind::analytic_auc) {
        report.analytic_comparison =
            make_reference_block(ReferenceKind::analytic_auc, analytic_auc_null(n_neg, n_pos),
                                 observed, restricted, n_test);
    }

    {
        auto out = open_out(fs::path(cfg.out_dir) / "report.txt");
        report.write(out);
    }
    {
        auto out = open_out(fs::path(cfg.out_dir) / "summary.tsv");
        out << ConfoundingReport::summary_header() << '\n' << report.summary_line() << '\n';
    }
    return report;
}

void cmd_simulate(const RunConfig& cfg) {
    const std::vector<std::string> subkeys = cfg.file.keys_with_prefix("scenario");
    std::vector<std::string> names;
    for (const auto& key : subkeys) {
        const auto dot = key.find('.');
        if (dot == std::string::npos) continue;
        const std::string name = key.substr(0, dot);
        if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    }
    if (names.empty()) throw SchemaError("simulate needs at least one scenario.<name>.* block");

    std::vector<SimScenario> scenarios;
    for (const auto& name : names) {
        SimScenario s;
        s.name = name;
        const std::string prefix = "scenario." + name + ".";
        const std::vector<std::string> joint = split_list(cfg.file.get(prefix + "joint"));
        if (joint.size() != 4) {
            throw SchemaError("scenario '" + name + "': joint needs 4 entries p00,p01,p10,p11");
        }
        try {
            s.joint = {{{std::stod(joint[0]), std::stod(joint[1])},
                        {std::stod(joint[2]), std::stod(joint[3])}}};
        } catch (const std::exception&) {
            throw SchemaError("scenario '" + name + "': bad joint probability");
        }
        s.n_samples = static_cast<std::size_t>(
            cfg.file.get_int(prefix + "n", static_cast<long long>(s.n_samples)));
        s.feature_count = static_cast<std::size_t>(
            cfg.file.get_int(prefix + "p", static_cast<long long>(s.feature_count)));
        s.beta_y = cfg.file.get_double(prefix + "beta_y", s.beta_y);
        s.beta_c = cfg.file.get_double(prefix + "beta_c", s.beta_c);
        s.test_fraction = cfg.file.get_double(prefix + "test_fraction", cfg.test_fraction());
        s.validate();
        scenarios.push_back(s);
    }

    ExperimentOptions opts;
    opts.replicates = static_cast<int>(cfg.file.get_int("replicates", 200));
    if (opts.replicates < 1) throw SchemaError("replicates must be >= 1");
    opts.permutations = cfg.permutation_count();
    opts.seed = cfg.seed_value();
    opts.threads = cfg.thread_count();
    opts.learner = cfg.learner_spec();

    const double alpha_max = cfg.file.get_double("alpha_max", 0.15);
    const int alpha_steps = static_cast<int>(cfg.file.get_int("alpha_steps", 31));
    if (alpha_steps < 2 || !(alpha_max > 0.0)) throw SchemaError("bad alpha grid");
    std::vector<double> alphas;
    for (int i = 0; i < alpha_steps; ++i) {
        alphas.push_back(alpha_max * static_cast<double>(i) / (alpha_steps - 1));
    }

    fs::create_directories(cfg.out_dir);
    auto pvalues_out = open_out(fs::path(cfg.out_dir) / "pvalues.tsv");
    pvalues_out << "scenario\treplicate\tpvalue\n";
    auto power_out = open_out(fs::path(cfg.out_dir) / "power.tsv");
    power_out << "scenario\talpha\tpower\treplicates\n";

    for (const auto& scenario : scenarios) {
        const std::vector<double> pvalues = run_confounding_pvalues(scenario, opts);
        for (std::size_t r = 0; r < pvalues.size(); ++r) {
            pvalues_out << scenario.name << '\t' << r << '\t' << fmt17(pvalues[r]) << '\n';
        }
        const PowerCurve curve = power_from_pvalues(scenario.name, pvalues, alphas);
        for (std::size_t i = 0; i < curve.alphas.size(); ++i) {
            power_out << scenario.name << '\t' << fmt17(curve.alphas[i]) << '\t'
                      << fmt17(curve.power[i]) << '\t' << curve.replicates << '\n';
        }
    }
}

int run_command(const std::string& command, const RunConfig& cfg) {
    try {
        if (command == "split") {
            cmd_split(cfg);
        } else if (command == "adjust") {
            cmd_adjust(cfg);
        } else if (command == "analyze") {
            cmd_analyze(cfg);
        } else if (command == "simulate") {
            cmd_simulate(cfg);
        } else {
            throw SchemaError("unknown command '" + command + "'");
        }
        return 0;
    } catch (const SchemaError& e) {
        std::cerr << "error (schema): " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error (numeric): " << e.what() << "\n";
        return 3;
    } catch (const InfeasibleError& e) {
        std::cerr << "error (infeasible): " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace confound
