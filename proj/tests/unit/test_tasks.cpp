#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "metam/errors.hpp"
#include "metam/tasks.hpp"

using namespace metam;
using namespace metam::testing;

namespace {

Table copied_target_table(std::uint64_t seed, std::size_t n = 200) {
    Rng rng(seed);
    std::vector<std::string> target;
    std::vector<double> copy, noise;
    for (std::size_t i = 0; i < n; ++i) {
        const bool pos = rng.uniform01() < 0.5;
        target.push_back(pos ? "yes" : "no");
        copy.push_back(pos ? 1.0 : 0.0);
        noise.push_back(rng.normal());
    }
    return make_table("t.csv", {str_column("target", target), num_column("copy", copy),
                                num_column("noise", noise)});
}

Table chance_table(std::uint64_t seed, std::size_t n = 1000) {
    Rng rng(seed);
    std::vector<std::string> target;
    std::vector<double> f1, f2;
    for (std::size_t i = 0; i < n; ++i) {
        target.push_back(i % 2 == 0 ? "a" : "b");
        f1.push_back(rng.normal());
        f2.push_back(rng.uniform01());
    }
    return make_table("t.csv", {str_column("target", target), num_column("f1", f1),
                                num_column("f2", f2)});
}

}  // namespace

TEST_CASE("classification nails a copied target") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto task = make_classification_task("target", seed);
        auto table = copied_target_table(seed);
        CHECK(checked_utility(*task, table) >= 0.95);
    }
}

TEST_CASE("classification stays near chance with independent features") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto task = make_classification_task("target", seed);
        auto table = chance_table(seed);
        const double u = checked_utility(*task, table);
        CHECK(u >= 0.3);
        CHECK(u <= 0.7);
    }
}

TEST_CASE("classification is deterministic under a fixed seed") {
    auto task = make_classification_task("target", 7);
    auto table = copied_target_table(3);
    CHECK(checked_utility(*task, table) == checked_utility(*task, table));
}

TEST_CASE("classification degenerates to zero utility") {
    auto task = make_classification_task("target", 1);
    std::vector<std::string> single(50, "only");
    Rng rng(2);
    std::vector<double> f;
    for (int i = 0; i < 50; ++i) f.push_back(rng.normal());
    auto table = make_table("t.csv", {str_column("target", single), num_column("f", f)});
    CHECK(checked_utility(*task, table) == 0.0);

    auto tiny = make_table("t.csv", {str_column("target", {"a", "b", "a"}),
                                     num_column("f", {1, 2, 3})});
    CHECK(checked_utility(*task, tiny) == 0.0);
}

TEST_CASE("appending a constant column barely moves classification utility") {
    double total_shift = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto task = make_classification_task("target", seed);
        auto table = copied_target_table(seed + 100);
        const double before = checked_utility(*task, table);
        Table wide = table;
        std::vector<double> constant(table.row_count, 3.25);
        wide.columns.push_back(num_column("const", constant));
        total_shift += std::abs(checked_utility(*task, wide) - before);
    }
    CHECK(total_shift / 20.0 <= 0.02);
}

TEST_CASE("regression recovers a feature equal to the target") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        std::vector<double> target;
        for (int i = 0; i < 200; ++i) target.push_back(rng.uniform01());
        auto table = make_table(
            "t.csv", {num_column("target", target), num_column("same", target)});
        auto task = make_regression_task("target", seed);
        CHECK(checked_utility(*task, table) >= 0.95);
    }
}

TEST_CASE("regression on pure noise lands in the chance band") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 40);
        std::vector<double> target, noise;
        for (int i = 0; i < 400; ++i) {
            target.push_back(rng.uniform01());
            noise.push_back(rng.normal());
        }
        auto table = make_table(
            "t.csv", {num_column("target", target), num_column("noise", noise)});
        auto task = make_regression_task("target", seed);
        const double u = checked_utility(*task, table);
        CHECK(u >= 0.6);
        CHECK(u <= 0.8);
    }
}

TEST_CASE("regression flags a constant target as degenerate with utility 1") {
    std::vector<double> target(60, 4.0), f;
    Rng rng(5);
    for (int i = 0; i < 60; ++i) f.push_back(rng.normal());
    auto table = make_table("t.csv", {num_column("target", target), num_column("f", f)});
    auto task = make_regression_task("target", 3);
    std::string details;
    CHECK(checked_utility(*task, table, &details) == doctest::Approx(1.0));
    CHECK(details.find("degenerate") != std::string::npos);
}

TEST_CASE("whatif detects a linear dependent") {
    Rng rng(11);
    std::vector<double> upd, dep;
    for (int i = 0; i < 500; ++i) {
        const double u = rng.normal();
        upd.push_back(u);
        dep.push_back(2.0 * u + 0.01 * rng.normal());
    }
    auto table = make_table("t.csv", {num_column("target", upd), num_column("A", dep)});
    auto task = make_whatif_task("target", {"A"});
    CHECK(checked_utility(*task, table) == doctest::Approx(1.0));
}

TEST_CASE("whatif rarely flags an independent column") {
    int zeros = 0;
    const int seeds = 60;
    for (int s = 0; s < seeds; ++s) {
        Rng rng(100 + s);
        std::vector<double> upd, ind;
        for (int i = 0; i < 500; ++i) {
            upd.push_back(rng.normal());
            ind.push_back(rng.normal());
        }
        auto table =
            make_table("t.csv", {num_column("target", upd), num_column("A", ind)});
        auto task = make_whatif_task("target", {"A"});
        if (checked_utility(*task, table) == 0.0) ++zeros;
    }
    // false-positive rate is alpha = 0.05
    CHECK(zeros >= static_cast<int>(seeds * 0.85));
}

TEST_CASE("whatif requires a nonempty ground truth") {
    CHECK_THROWS_AS(make_whatif_task("target", {}), ConfigError);
}

TEST_CASE("external task protocol") {
    auto table = make_table("t.csv", {num_column("x", {1, 2, 3})});

    auto ok = make_external_task("echo 0.73 #");
    CHECK(checked_utility(*ok, table) == doctest::Approx(0.73));

    auto out_of_range = make_external_task("echo 1.2 #");
    CHECK_THROWS_AS(checked_utility(*out_of_range, table), TaskFailure);

    auto crashes = make_external_task("exit 3 #");
    CHECK_THROWS_AS(checked_utility(*crashes, table), TaskFailure);

    auto garbage = make_external_task("echo not-a-number #");
    CHECK_THROWS_AS(checked_utility(*garbage, table), TaskFailure);

    auto slow = make_external_task("sleep 5 #", 0.2);
    CHECK_THROWS_AS(checked_utility(*slow, table), TaskFailure);
}

TEST_CASE("external task reads the csv it is handed") {
    auto table = make_table("t.csv", {num_column("x", {1, 2, 3, 4})});
    // prints 0.25 if the file has 5 lines (header + 4 rows)
    auto counting = make_external_task(
        "awk 'END { print (NR == 5) ? \"0.25\" : \"0.99\" }'");
    CHECK(checked_utility(*counting, table) == doctest::Approx(0.25));
}

TEST_CASE("task config round-trip") {
    auto c = load_task_config(R"({"kind":"classification","target":"y","seed":3})");
    CHECK(c->kind() == TaskKind::Classification);
    CHECK(c->target_column().value() == "y");

    auto w = load_task_config(
        R"({"kind":"whatif","target":"u","ground_truth":["a","b"],"alpha":0.01})");
    CHECK(w->kind() == TaskKind::WhatIf);

    auto e = load_task_config(R"({"kind":"external","command":"echo 0.5 #"})");
    CHECK(e->kind() == TaskKind::External);

    CHECK_THROWS_AS(load_task_config(R"({"kind":"bogus"})"), ConfigError);
    CHECK_THROWS_AS(load_task_config("not json"), ConfigError);
}
