#include <doctest.h>

#include <algorithm>

#include "coverage_task.hpp"
#include "metam/errors.hpp"
#include "metam/search.hpp"

using namespace metam;
using namespace metam::testing;

namespace {

SearchConfig coverage_config(double theta, std::uint64_t seed = 1) {
    SearchConfig cfg;
    cfg.theta = theta;
    cfg.seed = seed;
    cfg.max_hops = 1;
    cfg.epsilon = 1e-6;  // singleton clusters: the pure ranking regime
    cfg.max_queries = 100000;
    return cfg;
}

ProfileRegistry jittered_registry() {
    // two content-keyed noise profiles guarantee distinct vectors per table
    auto reg = ProfileRegistry::default_set();
    reg.add_noise_profiles(2);
    return reg;
}

struct Instance {
    CoverageFixture fx;
    SearchInputs inputs;
    std::map<std::string, std::vector<int>> sets;
};

Instance coverage_instance(std::size_t n, std::uint64_t seed,
                           const std::function<std::vector<int>(std::size_t)>& set_of) {
    Instance inst;
    inst.fx = make_coverage_fixture(n);
    CoverageTask probe({}, {});
    inst.inputs = build_search_inputs(inst.fx.d_in, inst.fx.repo, probe,
                                      jittered_registry(), coverage_config(0.9, seed));
    REQUIRE(inst.inputs.ids.size() == n);
    for (std::size_t i = 0; i < n; ++i) inst.sets[inst.inputs.ids[i]] = set_of(i);
    return inst;
}

}  // namespace

TEST_CASE("monotonic certifier rejects regressions and keeps improvements") {
    MonotonicCertifier c(0.6);
    CHECK_FALSE(c.try_accept(0.5));
    CHECK(c.accepted() == doctest::Approx(0.6));
    CHECK(c.try_accept(0.7));
    CHECK(c.accepted() == doctest::Approx(0.7));
    // a monotone stream is accepted verbatim
    MonotonicCertifier m(0.1);
    for (double u : {0.2, 0.3, 0.5}) CHECK(m.try_accept(u));
    CHECK(m.trajectory() == std::vector<double>{0.1, 0.2, 0.3, 0.5});
    for (std::size_t i = 1; i < m.trajectory().size(); ++i) {
        CHECK(m.trajectory()[i] > m.trajectory()[i - 1]);
    }
}

TEST_CASE("thompson draw favours the cluster with more successes") {
    std::map<std::string, std::vector<std::string>> members{
        {"a", {"a", "a1"}}, {"b", {"b", "b1"}}};
    std::map<std::string, std::pair<int, int>> posteriors{{"a", {4, 1}}, {"b", {1, 4}}};
    Rng rng(5);
    int from_a = 0;
    for (int i = 0; i < 1000; ++i) {
        auto subset = thompson_group_draw(members, posteriors, 1, rng);
        REQUIRE(subset.size() == 1);
        if (subset[0][0] == 'a') ++from_a;
    }
    CHECK(from_a > 700);
}

TEST_CASE("thompson draw with one cluster returns its member") {
    std::map<std::string, std::vector<std::string>> members{{"only", {"only"}}};
    std::map<std::string, std::pair<int, int>> posteriors{{"only", {1, 1}}};
    Rng rng(3);
    auto subset = thompson_group_draw(members, posteriors, 1, rng);
    REQUIRE(subset.size() == 1);
    CHECK(subset[0] == "only");
}

TEST_CASE("identify_group grows the subset size once singles are exhausted") {
    std::map<std::string, std::vector<std::string>> members{{"a", {"a"}}, {"b", {"b"}}};
    std::map<std::string, std::pair<int, int>> posteriors{{"a", {1, 1}}, {"b", {1, 1}}};
    Rng rng(9);
    std::size_t t = 1;
    // every size-1 subset is already queried
    auto queried = [](const std::vector<std::string>& s) { return s.size() < 2; };
    auto subset = identify_group(members, posteriors, t, 2, rng, queried, 32);
    REQUIRE(subset.has_value());
    CHECK(t == 2);
    CHECK(subset->size() == 2);
    // and when everything is queried the mechanism reports exhaustion
    auto all = [](const std::vector<std::string>&) { return true; };
    CHECK_FALSE(identify_group(members, posteriors, t, 2, rng, all, 32).has_value());
}

TEST_CASE("brute force oracle finds the planted pair and honours guards") {
    auto inst = coverage_instance(10, 2, [](std::size_t i) -> std::vector<int> {
        if (i == 3) return {0, 1};
        if (i == 7) return {2, 3};
        return {static_cast<int>(i % 2)};
    });
    CoverageTask task(inst.sets, {1, 1, 1, 1});
    auto best = brute_force_optimal(inst.inputs, inst.fx.d_in, inst.fx.repo, task, 0.99, 3);
    REQUIRE(best.has_value());
    REQUIRE(best->size() == 2);
    CHECK((*best)[0] == inst.inputs.ids[3]);
    CHECK((*best)[1] == inst.inputs.ids[7]);

    CHECK_FALSE(
        brute_force_optimal(inst.inputs, inst.fx.d_in, inst.fx.repo, task, 0.99, 1)
            .has_value());

    auto empty_ok =
        brute_force_optimal(inst.inputs, inst.fx.d_in, inst.fx.repo, task, 0.0, 2);
    REQUIRE(empty_ok.has_value());
    CHECK(empty_ok->empty());

    auto big = coverage_instance(17, 3, [](std::size_t) { return std::vector<int>{0}; });
    CoverageTask tiny(big.sets, {1});
    CHECK_THROWS_AS(
        brute_force_optimal(big.inputs, big.fx.d_in, big.fx.repo, tiny, 0.5, 2),
        TooLarge);
}

TEST_CASE("theta at or below base utility returns an empty solution") {
    auto inst = coverage_instance(5, 4, [](std::size_t i) -> std::vector<int> {
        return {static_cast<int>(i)};
    });
    SearchConfig cfg = coverage_config(0.5, 4);
    // the input table's own "key" column already covers the universe
    CoverageTask always({{"key", {0}}}, {1});
    Solution s = run_metam(inst.fx.d_in, inst.fx.repo, always, cfg, inst.inputs);
    CHECK(s.augmentation_ids.empty());
    CHECK(s.reached_theta);
    std::size_t search_queries = 0;
    for (const auto& rec : s.query_log) {
        if (rec.mechanism == Mechanism::Sequential || rec.mechanism == Mechanism::Group) {
            ++search_queries;
        }
    }
    CHECK(search_queries == 0);
}

TEST_CASE("a single sufficient candidate becomes the whole solution") {
    auto inst = coverage_instance(6, 5, [](std::size_t i) -> std::vector<int> {
        if (i == 2) return {0, 1, 2, 3};
        return {};
    });
    CoverageTask task(inst.sets, {1, 1, 1, 1});
    SearchConfig cfg = coverage_config(0.95, 5);
    Solution s = run_metam(inst.fx.d_in, inst.fx.repo, task, cfg, inst.inputs);
    REQUIRE(s.augmentation_ids.size() == 1);
    CHECK(s.augmentation_ids[0] == inst.inputs.ids[2]);
    CHECK(s.reached_theta);
    CHECK(s.utility == doctest::Approx(1.0));
}

TEST_CASE("identify_minimal drops redundant elements in reverse insertion order") {
    auto inst = coverage_instance(3, 6, [](std::size_t i) -> std::vector<int> {
        if (i == 0) return {0, 1};  // u depends only on this one
        return {};
    });
    CoverageTask task(inst.sets, {1, 1});
    SearchConfig cfg = coverage_config(0.99, 6);
    EvalContext eval(inst.fx.d_in, inst.fx.repo, task, inst.inputs, cfg);
    auto [minimal, utility] = identify_minimal(
        {inst.inputs.ids[0], inst.inputs.ids[1], inst.inputs.ids[2]}, 1.0, 0.99, eval);
    REQUIRE(minimal.size() == 1);
    CHECK(minimal[0] == inst.inputs.ids[0]);
    CHECK(utility == doctest::Approx(1.0));
}

TEST_CASE("identify_minimal keeps every necessary element") {
    auto inst = coverage_instance(3, 7, [](std::size_t i) -> std::vector<int> {
        return {static_cast<int>(i)};
    });
    CoverageTask task(inst.sets, {1, 1, 1});
    SearchConfig cfg = coverage_config(0.99, 7);
    EvalContext eval(inst.fx.d_in, inst.fx.repo, task, inst.inputs, cfg);
    auto [minimal, utility] =
        identify_minimal({inst.inputs.ids[0], inst.inputs.ids[1], inst.inputs.ids[2]},
                         1.0, 0.99, eval);
    CHECK(minimal.size() == 3);
}

TEST_CASE("identify_minimal tie keeps the first-inserted element") {
    // both orders of two interchangeable elements: the survivor is the first
    auto inst = coverage_instance(2, 8, [](std::size_t) -> std::vector<int> {
        return {0};  // either column alone reaches theta
    });
    CoverageTask task(inst.sets, {1});
    SearchConfig cfg = coverage_config(0.99, 8);
    for (bool flip : {false, true}) {
        EvalContext eval(inst.fx.d_in, inst.fx.repo, task, inst.inputs, cfg);
        std::vector<std::string> order{inst.inputs.ids[flip ? 1 : 0],
                                       inst.inputs.ids[flip ? 0 : 1]};
        auto [minimal, utility] = identify_minimal(order, 1.0, 0.99, eval);
        REQUIRE(minimal.size() == 1);
        CHECK(minimal[0] == order[0]);
    }
}

TEST_CASE("check_stop triggers on each criterion") {
    auto inst = coverage_instance(2, 9, [](std::size_t) { return std::vector<int>{0}; });
    CoverageTask task(inst.sets, {1});
    SearchConfig cfg = coverage_config(0.8, 9);
    EvalContext eval(inst.fx.d_in, inst.fx.repo, task, inst.inputs, cfg);
    CHECK(check_stop(0.85, eval, 0, false, cfg));       // utility over theta
    CHECK_FALSE(check_stop(0.5, eval, 0, false, cfg));  // budget not exhausted
    cfg.max_solution_size = 2;
    CHECK(check_stop(0.5, eval, 2, false, cfg));
    cfg.max_solution_size.reset();
    cfg.max_seconds = 0.0;
    CHECK(check_stop(0.5, eval, 0, false, cfg));
    cfg.max_seconds.reset();
    CHECK(check_stop(0.5, eval, 0, true, cfg));  // exhausted with no improvement
}

TEST_CASE("greedy sequential pass queries at most one candidate per cluster") {
    // two identical-content tables share a cluster; a third covers fewer keys
    // so its overlap profile moves it to its own cluster
    CoverageFixture fx = make_coverage_fixture(3);
    fx.repo.tables.at("t001.csv").columns = fx.repo.tables.at("t000.csv").columns;
    Table& odd = fx.repo.tables.at("t002.csv");
    odd.row_count = 5;
    for (auto& col : odd.columns) {
        col.values.resize(5);
        col.distinct_count = count_distinct(col.values);
    }
    CoverageTask probe({}, {});
    SearchConfig cfg = coverage_config(0.99, 11);
    cfg.epsilon = 0.05;
    cfg.group_mechanism = false;
    auto inputs = build_search_inputs(fx.d_in, fx.repo, probe,
                                      ProfileRegistry::default_set(), cfg);
    REQUIRE(inputs.ids.size() == 3);

    std::map<std::string, std::vector<int>> sets;
    for (const auto& id : inputs.ids) sets[id] = {};
    CoverageTask task(sets, {1});
    Solution s = run_metam(fx.d_in, fx.repo, task, cfg, inputs);

    // t000 and t001 have identical profiles: same cluster. First pass must
    // not query both.
    auto cluster_of = [&](const std::string& id) {
        return id.find("t002") != std::string::npos ? 1 : 0;
    };
    std::vector<int> first_pass;
    for (const auto& rec : s.query_log) {
        if (rec.mechanism != Mechanism::Sequential) continue;
        if (first_pass.size() == 2) break;
        first_pass.push_back(cluster_of(rec.subset.back()));
    }
    REQUIRE(first_pass.size() == 2);
    CHECK(first_pass[0] != first_pass[1]);
}

TEST_CASE("sequential greedy meets the coverage optimum bound") {
    // smoke version of the approximation property; the acceptance suite runs
    // the full 50-instance sweep
    Rng rng(42);
    for (int rep = 0; rep < 5; ++rep) {
        const std::size_t n = 8 + rng.uniform_index(5);
        const int universe = 12;
        std::vector<std::vector<int>> sets(n);
        for (auto& s : sets) {
            const std::size_t size = 1 + rng.uniform_index(5);
            std::set<int> uniq;
            for (std::size_t i = 0; i < size; ++i) {
                uniq.insert(static_cast<int>(rng.uniform_index(universe)));
            }
            s.assign(uniq.begin(), uniq.end());
        }
        auto inst = coverage_instance(n, 100 + rep,
                                      [&](std::size_t i) { return sets[i]; });
        std::vector<double> weights(universe);
        for (auto& w : weights) w = 0.2 + rng.uniform01();
        CoverageTask task(inst.sets, weights);

        const std::size_t k = 3;
        SearchConfig cfg = coverage_config(1.0, 200 + rep);
        cfg.group_mechanism = false;
        cfg.max_solution_size = k;
        Solution s = run_metam(inst.fx.d_in, inst.fx.repo, task, cfg, inst.inputs);

        const double opt = task.optimum(inst.inputs.ids, k);
        const double achieved = task.coverage_of(s.augmentation_ids.empty()
                                                     ? std::vector<std::string>{}
                                                     : s.augmentation_ids);
        // final minimality can only strip zero-contribution elements
        CHECK(achieved >= (1.0 - 1.0 / 2.718281828459045) * opt - 1e-12);
    }
}

TEST_CASE("budget is respected and trajectories never decrease") {
    auto inst = coverage_instance(12, 13, [](std::size_t i) -> std::vector<int> {
        return {static_cast<int>(i), static_cast<int>((i * 7) % 20)};
    });
    std::vector<double> weights(20, 1.0);
    CoverageTask task(inst.sets, weights);
    SearchConfig cfg = coverage_config(1.0, 13);
    cfg.max_queries = 25;
    Solution s = run_metam(inst.fx.d_in, inst.fx.repo, task, cfg, inst.inputs);
    CHECK(s.query_count <= 25);
    std::size_t minimality = 0;
    for (const auto& rec : s.query_log) {
        if (rec.mechanism == Mechanism::Minimality) ++minimality;
    }
    CHECK(s.query_log.size() - minimality <= 25);
    CHECK(minimality <= s.augmentation_ids.size() * s.augmentation_ids.size() +
                            s.augmentation_ids.size() + 1);
    for (std::size_t i = 1; i < s.accepted_trajectory.size(); ++i) {
        CHECK(s.accepted_trajectory[i] >= s.accepted_trajectory[i - 1]);
    }
}

TEST_CASE("runs are bit-reproducible for a fixed seed") {
    auto inst = coverage_instance(10, 17, [](std::size_t i) -> std::vector<int> {
        return {static_cast<int>(i % 4), static_cast<int>((i + 2) % 4)};
    });
    CoverageTask task(inst.sets, {1, 1, 1, 1});
    SearchConfig cfg = coverage_config(0.9, 17);
    Solution a = run_metam(inst.fx.d_in, inst.fx.repo, task, cfg, inst.inputs);
    Solution b = run_metam(inst.fx.d_in, inst.fx.repo, task, cfg, inst.inputs);
    CHECK(a.querylog_jsonl() == b.querylog_jsonl());
    CHECK(a.augmentation_ids == b.augmentation_ids);
}

TEST_CASE("task failure yields a partial solution with the log preserved") {
    auto inst = coverage_instance(4, 19, [](std::size_t i) -> std::vector<int> {
        return {static_cast<int>(i)};
    });
    struct FailingTask final : UtilityTask {
        TaskKind kind() const override { return TaskKind::External; }
        TaskResult evaluate(const Table& t) const override {
            if (t.columns.size() > 1) throw TaskFailure("boom");
            return {0.1, ""};
        }
    } task;
    SearchConfig cfg = coverage_config(0.9, 19);
    Solution s = run_metam(inst.fx.d_in, inst.fx.repo, task, cfg, inst.inputs);
    CHECK(s.aborted);
    CHECK(s.error == "boom");
    CHECK_FALSE(s.query_log.empty());
}

TEST_CASE("solution json carries the run facts") {
    auto inst = coverage_instance(3, 23, [](std::size_t i) -> std::vector<int> {
        return i == 0 ? std::vector<int>{0} : std::vector<int>{};
    });
    CoverageTask task(inst.sets, {1});
    SearchConfig cfg = coverage_config(0.9, 23);
    Solution s = run_metam(inst.fx.d_in, inst.fx.repo, task, cfg, inst.inputs);
    const std::string j = s.to_json();
    for (const char* key : {"augmentations", "utility", "base_utility", "beta",
                            "utility_trajectory", "cluster_count", "query_count"}) {
        CHECK(j.find(key) != std::string::npos);
    }
}
