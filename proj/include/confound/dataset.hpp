#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "confound/matrix.hpp"

namespace confound {

// Categorical vector: per-sample level index plus a name per level.
// Indices are always assigned by first appearance in row order, so two
// Levels describing the same partition with the same names compare equal.
struct Levels {
    std::vector<int> index;
    std::vector<std::string> names;

    int level_count() const { return static_cast<int>(names.size()); }
    std::size_t size() const { return index.size(); }
    const std::string& name_of(std::size_t i) const { return names[index[i]]; }

    static Levels from_strings(std::span<const std::string> values);
    void validate() const;

    bool operator==(const Levels&) const = default;
};

struct Dataset {
    Matrix features;               // n x p
    std::vector<int> labels;       // each 0 or 1
    Levels confounder;
    std::vector<double> weights;   // length n, all 1.0 unless supplied

    std::vector<std::string> feature_names;
    std::string label_name = "label";
    std::string confounder_name = "confounder";
    bool has_weight_column = false;
    std::string weight_name = "weight";

    std::size_t size() const { return labels.size(); }
    std::size_t feature_count() const { return features.cols; }
    int level_count() const { return confounder.level_count(); }

    void validate() const;  // throws SchemaError on any invariant violation

    // Row subset in the given order; confounder levels are re-encoded by
    // first appearance so unobserved levels are dropped.
    Dataset subset(std::span<const std::size_t> rows) const;

    bool operator==(const Dataset&) const = default;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;

    void validate(std::size_t n) const;
};

// Closed interval [lo, hi].
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return v >= lo && v <= hi; }
    std::string name() const;
};

struct DiscretizationSpec {
    std::vector<Interval> cut_ranges;

    // Parses "18:58,59:99".
    static DiscretizationSpec parse(const std::string& text);
    void validate() const;  // ordered, non-overlapping
};

struct CsvSchema {
    std::string label;
    std::vector<std::string> features;     // empty: every unassigned column
    std::vector<std::string> confounders;  // at least one
    std::string weight;                    // empty: no weight column
    std::map<std::string, DiscretizationSpec> discretize;

    void validate() const;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema);
void save_csv(const Dataset& ds, const std::string& path);

Levels discretize(std::span<const double> values, const DiscretizationSpec& spec);
Levels combine_confounders(const Levels& a, const Levels& b);

// Per (confounder level x label) cell, round(cell * test_fraction) samples go
// to the test side (half-up, clamped so both sides stay non-empty), drawn
// uniformly under the seed. Every cell must hold at least 2 samples.
SplitIndices stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed);

// Concatenates two datasets with compatible columns, merging confounder
// levels by name, and returns the combined data plus the train/test split
// that maps back to the two parts.
std::pair<Dataset, SplitIndices> concat_as_split(const Dataset& train, const Dataset& test);

}  // namespace confound
