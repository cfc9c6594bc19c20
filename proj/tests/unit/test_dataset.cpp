#include <cstdio>
#include <filesystem>
#include <fstream>

#include "confound/dataset.hpp"
#include "confound/errors.hpp"
#include "confound/rng.hpp"
#include "doctest.h"
#include "support/gen.hpp"

using namespace confound;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path.string();
}

CsvSchema toy_schema() {
    CsvSchema schema;
    schema.label = "label";
    schema.confounders = {"conf"};
    return schema;
}

}  // namespace

TEST_CASE("load_csv parses a small file") {
    const auto path = write_temp("ds_small.csv",
                                 "f1,label,conf\n"
                                 "0.5,1,M\n"
                                 "1.5,1,F\n"
                                 "-0.25,0,M\n"
                                 "2,0,F\n");
    const Dataset ds = load_csv(path, toy_schema());
    CHECK(ds.size() == 4);
    CHECK(ds.feature_count() == 1);
    CHECK(ds.level_count() == 2);
    CHECK(ds.labels == std::vector<int>{1, 1, 0, 0});
    CHECK(ds.features(3, 0) == 2.0);
    CHECK(ds.weights == std::vector<double>(4, 1.0));
}

TEST_CASE("load_csv rejects bad labels, cells and columns") {
    const auto bad_label = write_temp("ds_badlabel.csv", "f1,label,conf\n1.0,2,M\n");
    CHECK_THROWS_WITH_AS(load_csv(bad_label, toy_schema()),
                         doctest::Contains("invalid label"), SchemaError);

    const auto bad_cell = write_temp("ds_badcell.csv", "f1,label,conf\noops,1,M\n");
    CHECK_THROWS_WITH_AS(load_csv(bad_cell, toy_schema()),
                         doctest::Contains("non-numeric"), SchemaError);

    const auto empty = write_temp("ds_empty.csv", "");
    CHECK_THROWS_WITH_AS(load_csv(empty, toy_schema()), doctest::Contains("empty"), SchemaError);

    const auto no_rows = write_temp("ds_norows.csv", "f1,label,conf\n");
    CHECK_THROWS_AS(load_csv(no_rows, toy_schema()), SchemaError);

    const auto missing = write_temp("ds_missing.csv", "f1,response,conf\n1.0,1,M\n");
    CHECK_THROWS_WITH_AS(load_csv(missing, toy_schema()), doctest::Contains("'label' missing"),
                         SchemaError);
}

TEST_CASE("confounder levels are encoded by first appearance") {
    const auto path = write_temp("ds_levels.csv",
                                 "f1,label,conf\n"
                                 "0,1,M\n"
                                 "0,0,F\n"
                                 "0,1,M\n"
                                 "0,0,F\n");
    const Dataset ds = load_csv(path, toy_schema());
    CHECK(ds.level_count() == 2);
    CHECK(ds.confounder.index == std::vector<int>{0, 1, 0, 1});
    CHECK(ds.confounder.names == std::vector<std::string>{"M", "F"});
}

TEST_CASE("continuous-looking confounders are refused without cut points") {
    std::string body = "f1,label,age\n";
    for (int i = 0; i < 30; ++i) {
        body += "0," + std::to_string(i % 2) + "," + std::to_string(20 + i) + "\n";
    }
    const auto path = write_temp("ds_cont.csv", body);
    CsvSchema schema;
    schema.label = "label";
    schema.confounders = {"age"};
    CHECK_THROWS_WITH_AS(load_csv(path, schema), doctest::Contains("looks continuous"),
                         SchemaError);

    schema.discretize["age"] = DiscretizationSpec::parse("18:34,35:60");
    const Dataset ds = load_csv(path, schema);
    CHECK(ds.level_count() == 2);
}

TEST_CASE("discretize maps values into closed intervals") {
    const DiscretizationSpec two = DiscretizationSpec::parse("18:58,59:99");
    const std::vector<double> ages = {18, 59, 58, 99};
    const Levels lv = discretize(ages, two);
    CHECK(lv.index == std::vector<int>{0, 1, 0, 1});
    CHECK(lv.names[0] == "18:58");
    CHECK(lv.names[1] == "59:99");

    const std::vector<double> young = {18.0};
    CHECK(discretize(young, two).index[0] == 0);

    const std::vector<double> outside = {100.0};
    CHECK_THROWS_WITH_AS(discretize(outside, two), doctest::Contains("outside"), SchemaError);
}

TEST_CASE("discretization specs validate ordering") {
    CHECK_THROWS_AS(DiscretizationSpec::parse("18:58,50:99"), SchemaError);
    CHECK_THROWS_AS(DiscretizationSpec::parse("58:18"), SchemaError);
    CHECK_THROWS_AS(DiscretizationSpec::parse(""), SchemaError);
}

TEST_CASE("combine_confounders crosses observed level pairs") {
    const std::vector<std::string> gender = {"M", "M", "F", "F"};
    const std::vector<std::string> age = {"young", "senior", "young", "senior"};
    const Levels combined =
        combine_confounders(Levels::from_strings(gender), Levels::from_strings(age));
    CHECK(combined.level_count() == 4);
    CHECK(combined.names == std::vector<std::string>{"M/young", "M/senior", "F/young", "F/senior"});

    SUBCASE("constant second factor leaves the partition unchanged") {
        const std::vector<std::string> constant = {"x", "x", "x", "x"};
        const Levels same = combine_confounders(Levels::from_strings(gender),
                                                Levels::from_strings(constant));
        CHECK(same.index == Levels::from_strings(gender).index);
    }
    SUBCASE("combining a partition with itself is idempotent") {
        const Levels g = Levels::from_strings(gender);
        CHECK(combine_confounders(g, g).index == g.index);
    }
    SUBCASE("length mismatch is rejected") {
        const std::vector<std::string> shorter = {"a"};
        CHECK_THROWS_AS(
            combine_confounders(Levels::from_strings(gender), Levels::from_strings(shorter)),
            SchemaError);
    }
}

TEST_CASE("combined partition refines both inputs") {
    Rng rng(7);
    std::vector<std::string> a(60), b(60);
    for (std::size_t i = 0; i < 60; ++i) {
        a[i] = "a" + std::to_string(rng.below(3));
        b[i] = "b" + std::to_string(rng.below(4));
    }
    const Levels la = Levels::from_strings(a);
    const Levels lb = Levels::from_strings(b);
    const Levels combined = combine_confounders(la, lb);
    for (std::size_t i = 0; i < 60; ++i) {
        for (std::size_t j = 0; j < 60; ++j) {
            if (combined.index[i] == combined.index[j]) {
                CHECK(la.index[i] == la.index[j]);
                CHECK(lb.index[i] == lb.index[j]);
            }
            if (la.index[i] == la.index[j] && lb.index[i] == lb.index[j]) {
                CHECK(combined.index[i] == combined.index[j]);
            }
        }
    }
}

TEST_CASE("stratified_split keeps exact per-cell proportions on the toy layout") {
    // 16 samples, 4 cells of size 4, fraction 0.25: one test row per cell
    Rng rng(11);
    Dataset ds = testsupport::random_dataset(rng, 16, 2, 2, {0.5, 0.5}, 4);
    const SplitIndices split = stratified_split(ds, 0.25, 42);
    CHECK(split.test.size() == 4);
    CHECK(split.train.size() == 12);
    for (int level = 0; level < 2; ++level) {
        for (int lab = 0; lab < 2; ++lab) {
            std::size_t in_test = 0;
            for (std::size_t i : split.test) {
                if (ds.confounder.index[i] == level && ds.labels[i] == lab) ++in_test;
            }
            CHECK(in_test == 1);
        }
    }
}

TEST_CASE("stratified_split is deterministic and validates cells") {
    Rng rng(13);
    Dataset ds = testsupport::random_dataset(rng, 200, 3, 3, {0.3, 0.5, 0.7});
    const SplitIndices a = stratified_split(ds, 0.3, 99);
    const SplitIndices b = stratified_split(ds, 0.3, 99);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    const SplitIndices c = stratified_split(ds, 0.3, 100);
    CHECK(a.test != c.test);

    SUBCASE("a singleton cell is rejected") {
        // two levels; level z appears once with label 1 only
        const auto path = write_temp("ds_cell1.csv",
                                     "f1,label,conf\n"
                                     "0,1,a\n0,1,a\n0,0,a\n0,0,a\n0,1,z\n");
        CHECK_THROWS_AS(stratified_split(load_csv(path, toy_schema()), 0.25, 1),
                        InfeasibleError);
    }
}

TEST_CASE("stratified_split proportions stay within 1/cell of the fraction") {
    Rng rng(17);
    for (int rep = 0; rep < 5; ++rep) {
        const double fraction = 0.1 + 0.2 * rep;
        Dataset ds = testsupport::random_dataset(rng, 150 + 40 * rep, 2, 3, {0.2, 0.5, 0.8}, 3);
        const SplitIndices split = stratified_split(ds, fraction, 1000 + rep);
        for (int level = 0; level < ds.level_count(); ++level) {
            for (int lab = 0; lab < 2; ++lab) {
                double cell = 0, in_test = 0;
                for (std::size_t i = 0; i < ds.size(); ++i) {
                    if (ds.confounder.index[i] == level && ds.labels[i] == lab) ++cell;
                }
                for (std::size_t i : split.test) {
                    if (ds.confounder.index[i] == level && ds.labels[i] == lab) ++in_test;
                }
                REQUIRE(cell >= 2);
                CHECK(std::abs(in_test / cell - fraction) <= 1.0 / cell + 1e-12);
            }
        }
    }
}

TEST_CASE("csv round trip reproduces the dataset") {
    Rng rng(23);
    for (int rep = 0; rep < 10; ++rep) {
        Dataset ds = testsupport::random_dataset(rng, 30 + 7 * rep, 1 + rep % 4, 1 + rep % 3,
                                                 {0.4, 0.6, 0.5});
        if (rep % 2 == 1) {
            for (auto& w : ds.weights) w = 0.25 + rng.next_double();
            ds.has_weight_column = true;
        }
        const auto path = write_temp("ds_roundtrip.csv", "");
        save_csv(ds, path);
        CsvSchema schema;
        schema.label = ds.label_name;
        schema.features = ds.feature_names;
        schema.confounders = {ds.confounder_name};
        if (ds.has_weight_column) schema.weight = ds.weight_name;
        const Dataset back = load_csv(path, schema);
        CHECK(back == ds);
    }
}

TEST_CASE("subset re-encodes levels by first appearance") {
    Rng rng(29);
    const Dataset ds = testsupport::random_dataset(rng, 40, 2, 3, {0.5, 0.5, 0.5});
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.confounder.index[i] == 2) rows.push_back(i);
    }
    const Dataset sub = ds.subset(rows);
    CHECK(sub.level_count() == 1);
    CHECK(sub.confounder.names[0] == "g2");
}

TEST_CASE("dataset invariants are enforced") {
    Rng rng(31);
    Dataset ds = testsupport::random_dataset(rng, 20, 2, 2, {0.5, 0.5});
    SUBCASE("labels") {
        ds.labels[3] = 2;
        CHECK_THROWS_AS(ds.validate(), SchemaError);
    }
    SUBCASE("weights") {
        ds.weights[0] = -1.0;
        CHECK_THROWS_AS(ds.validate(), SchemaError);
    }
    SUBCASE("all-zero weights") {
        ds.weights.assign(ds.size(), 0.0);
        CHECK_THROWS_AS(ds.validate(), SchemaError);
    }
    SUBCASE("non-finite feature") {
        ds.features(0, 0) = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(ds.validate(), SchemaError);
    }
}
