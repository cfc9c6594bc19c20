#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "confound/config.hpp"
#include "confound/dataset.hpp"
#include "confound/inference.hpp"
#include "confound/learners.hpp"
#include "confound/metrics.hpp"

namespace confound {

struct RunConfig {
    ConfigFile file;

    // paths
    std::string input_path;   // split
    std::string train_path;   // adjust / analyze
    std::string test_path;    // adjust / analyze
    std::string out_dir = ".";
    std::string target_joint_path;

    // flag overrides (win over config-file keys when set)
    std::optional<std::uint64_t> seed;
    std::optional<int> permutations;
    std::optional<std::string> metric;
    std::optional<std::string> learner;
    std::optional<std::string> adjust;
    std::optional<int> threads;

    CsvSchema schema() const;
    LearnerSpec learner_spec() const;
    MetricKind metric_kind() const;
    std::uint64_t seed_value() const;
    int permutation_count() const;
    int thread_count() const;
    double test_fraction() const;
};

void cmd_split(const RunConfig& cfg);
void cmd_adjust(const RunConfig& cfg);
ConfoundingReport cmd_analyze(const RunConfig& cfg);
void cmd_simulate(const RunConfig& cfg);

// Maps the error taxonomy onto exit codes: 0 ok, 2 schema, 3 numeric,
// 4 infeasible, 1 anything else.
int run_command(const std::string& command, const RunConfig& cfg);

}  // namespace confound
