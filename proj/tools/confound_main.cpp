#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "confound/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Confounding diagnostics for predictive models via restricted permutations"};
    app.require_subcommand(1);

    std::vector<std::string> config_paths;
    confound::RunConfig cfg;
    std::uint64_t seed = 0;
    int b = 0;
    int threads = 0;
    std::string metric, learner, adjust;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_paths,
                        "configuration file(s), 'key = value' lines; later files override");
        cmd->add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
        cmd->add_option("--seed", seed, "master seed for all randomness");
        cmd->add_option("--threads", threads, "worker threads (results do not depend on this)");
    };

    CLI::App* split = app.add_subcommand("split", "stratified train/test split of a CSV");
    add_common(split);
    split->add_option("--input", cfg.input_path, "input CSV")->required();

    CLI::App* adjust_cmd =
        app.add_subcommand("adjust", "balance train/test sets by matching or IPW");
    add_common(adjust_cmd);
    adjust_cmd->add_option("--train", cfg.train_path, "training CSV")->required();
    adjust_cmd->add_option("--test", cfg.test_path, "test CSV")->required();
    adjust_cmd->add_option("--adjust", adjust, "match | ipw-weights | ipw-resample");

    CLI::App* analyze = app.add_subcommand(
        "analyze", "observed metric, permutation nulls, unconfounded estimate and test");
    add_common(analyze);
    analyze->add_option("--train", cfg.train_path, "training CSV")->required();
    analyze->add_option("--test", cfg.test_path, "test CSV")->required();
    analyze->add_option("--b", b, "number of permutations");
    analyze->add_option("--metric", metric, "auc | accuracy | mse | mae");
    analyze->add_option("--learner", learner, "logistic | forest");
    analyze->add_option("--target-joint", cfg.target_joint_path,
                        "target-population joint table CSV (baseline-null reference)");

    CLI::App* simulate =
        app.add_subcommand("simulate", "power / type-I experiments on synthetic data");
    add_common(simulate);
    simulate->add_option("--b", b, "permutations per replicate");
    simulate->add_option("--learner", learner, "logistic | forest");

    CLI11_PARSE(app, argc, argv);

    try {
        for (const auto& path : config_paths) {
            const confound::ConfigFile file = confound::ConfigFile::load(path);
            for (const auto& [key, value] : file.values) cfg.file.values[key] = value;
        }
    } catch (const std::exception& e) {
        std::cerr << "error (schema): " << e.what() << "\n";
        return 2;
    }

    CLI::App* chosen = app.get_subcommands().front();
    auto flag_given = [&](const std::string& name) {
        const CLI::Option* opt = chosen->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    if (flag_given("--seed")) cfg.seed = seed;
    if (flag_given("--threads")) cfg.threads = threads;
    if (flag_given("--b")) cfg.permutations = b;
    if (!metric.empty()) cfg.metric = metric;
    if (!learner.empty()) cfg.learner = learner;
    if (!adjust.empty()) cfg.adjust = adjust;

    return confound::run_command(chosen->get_name(), cfg);
}
