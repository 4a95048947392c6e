#include <doctest.h>

#include <algorithm>
#include <set>

#include "metam/core.hpp"
#include "metam/discovery.hpp"
#include "metam/errors.hpp"
#include "metam/repository.hpp"

using namespace metam;

namespace {

Column text_column(std::string name, std::vector<std::string> vals) {
    Column c;
    c.name = std::move(name);
    for (auto& v : vals) c.values.emplace_back(std::move(v));
    c.dtype = infer_dtype(c.values);
    c.distinct_count = count_distinct(c.values);
    return c;
}

Table make_table(std::string id, std::vector<Column> cols) {
    Table t;
    t.id = std::move(id);
    t.row_count = cols.empty() ? 0 : cols[0].values.size();
    t.columns = std::move(cols);
    return t;
}

// fixture: d_in --(key1)--> t1 --(key2)--> t2, t3 unreachable
struct ChainFixture {
    Repository repo;
    Table d_in;

    ChainFixture() {
        d_in = make_table("din.csv", {text_column("key1", {"a1", "a2", "a3", "a4"}),
                                      text_column("note", {"w", "x", "y", "z"})});
        repo.tables["t1.csv"] =
            make_table("t1.csv", {text_column("key1", {"a1", "a2", "a3", "a4"}),
                                  text_column("key2", {"b1", "b2", "b3", "b4"})});
        repo.tables["t2.csv"] =
            make_table("t2.csv", {text_column("key2", {"b1", "b2", "b3", "b4"}),
                                  text_column("val", {"v1", "v2", "v3", "v4"})});
        repo.tables["t3.csv"] =
            make_table("t3.csv", {text_column("other", {"q1", "q2", "q3", "q4"}),
                                  text_column("val", {"u1", "u2", "u3", "u4"})});
    }
};

// exhaustive path enumeration with exact containment, the oracle for
// generate_candidates on small fixtures
void enumerate_paths(const Table& d_in, const Repository& repo, double threshold,
                     int max_hops, const Table& from, JoinPath path,
                     std::set<std::string>& out) {
    if (static_cast<int>(path.edges.size()) >= max_hops) return;
    std::set<std::string> visited{d_in.id};
    for (const auto& e : path.edges) visited.insert(e.right.table);
    for (std::size_t c = 0; c < from.columns.size(); ++c) {
        const auto& col = from.columns[c];
        if (col.dtype == Dtype::Numeric || col.distinct_count < 2) continue;
        for (const auto& [tid, t] : repo.tables) {
            if (visited.count(tid)) continue;
            for (std::size_t rc = 0; rc < t.columns.size(); ++rc) {
                const auto& rcol = t.columns[rc];
                if (rcol.dtype == Dtype::Numeric || rcol.distinct_count < 2) continue;
                if (exact_containment(col, rcol) < threshold) continue;
                JoinPath next = path;
                next.edges.push_back({{from.id, c}, {tid, rc}, 1.0});
                for (std::size_t j = 0; j < t.columns.size(); ++j) {
                    if (j != rc) out.insert(make_aug_id(next, j));
                }
                enumerate_paths(d_in, repo, threshold, max_hops, t, next, out);
            }
        }
    }
}

}  // namespace

TEST_CASE("identical value sets give containment 1.0") {
    auto a = text_column("a", {"x", "y", "z"});
    auto b = text_column("b", {"z", "y", "x"});
    Repository repo;
    repo.tables["t.csv"] = make_table("t.csv", {b});
    auto idx = JoinIndex::build(repo, 64);
    auto sa = idx.make_sketch({"q", 0}, a);
    CHECK(JoinIndex::containment(sa, idx.sketches()[0]) == doctest::Approx(1.0));
}

TEST_CASE("small-set containment is exact set arithmetic") {
    auto a = text_column("a", {"k1", "k2", "k3", "k4"});
    auto b = text_column("b", {"k2", "k3", "k4", "k5", "k6"});
    CHECK(exact_containment(a, b) == doctest::Approx(0.75));
    Repository repo;
    repo.tables["t.csv"] = make_table("t.csv", {b});
    auto idx = JoinIndex::build(repo, 64);
    auto sa = idx.make_sketch({"q", 0}, a);
    CHECK(JoinIndex::containment(sa, idx.sketches()[0]) == doctest::Approx(0.75));
}

TEST_CASE("disjoint 1000-value sets estimate near-zero containment") {
    Rng rng(91);
    for (int pair = 0; pair < 100; ++pair) {
        std::vector<std::string> va, vb;
        for (int i = 0; i < 1000; ++i) {
            va.push_back("a" + std::to_string(pair) + "_" + std::to_string(i));
            vb.push_back("b" + std::to_string(pair) + "_" + std::to_string(i));
        }
        auto ca = text_column("a", va);
        auto cb = text_column("b", vb);
        Repository repo;
        repo.tables["t.csv"] = make_table("t.csv", {cb});
        auto idx = JoinIndex::build(repo, 128);
        auto sa = idx.make_sketch({"q", 0}, ca);
        // 1000 distinct values exceeds the exact-set limit, so this exercises
        // the signature estimator
        CHECK(idx.sketches()[0].small_set.empty());
        CHECK(JoinIndex::containment(sa, idx.sketches()[0]) <= 0.05);
    }
}

TEST_CASE("full containment yields augmentations for every non-key column") {
    ChainFixture fx;
    auto idx = JoinIndex::build(fx.repo, 64);
    auto augs = generate_candidates(fx.d_in, idx, fx.repo, 0.9, 1);
    // t1 reachable from key1; its non-key column key2 becomes the one candidate
    REQUIRE(augs.size() == 1);
    CHECK(augs[0].path.terminal().table == "t1.csv");
    CHECK(augs[0].column_index == 1);
}

TEST_CASE("threshold nobody meets yields no candidates") {
    Repository repo;
    repo.tables["t.csv"] =
        make_table("t.csv", {text_column("k", {"zz1", "zz2", "zz3"})});
    Table d_in = make_table("din.csv", {text_column("k", {"aa1", "aa2", "aa3"})});
    auto idx = JoinIndex::build(repo, 64);
    CHECK(generate_candidates(d_in, idx, repo, 0.5, 2).empty());
}

TEST_CASE("two-hop chains match brute-force enumeration") {
    ChainFixture fx;
    auto idx = JoinIndex::build(fx.repo, 64);
    auto augs = generate_candidates(fx.d_in, idx, fx.repo, 0.6, 2);

    std::set<std::string> expected;
    enumerate_paths(fx.d_in, fx.repo, 0.6, 2, fx.d_in, {}, expected);
    std::set<std::string> got;
    for (const auto& a : augs) got.insert(a.id);
    CHECK(got == expected);

    bool has_two_hop = std::any_of(augs.begin(), augs.end(), [](const Augmentation& a) {
        return a.path.edges.size() == 2 && a.path.terminal().table == "t2.csv";
    });
    CHECK(has_two_hop);
}

TEST_CASE("candidate order is deterministic and sorted by id") {
    ChainFixture fx;
    auto idx = JoinIndex::build(fx.repo, 64);
    auto augs = generate_candidates(fx.d_in, idx, fx.repo, 0.6, 2);
    CHECK(std::is_sorted(augs.begin(), augs.end(),
                         [](const auto& a, const auto& b) { return a.id < b.id; }));
}

TEST_CASE("raising the threshold never adds candidates") {
    Rng rng(17);
    Repository repo;
    Table d_in =
        make_table("din.csv", {text_column("k", {"k1", "k2", "k3", "k4", "k5", "k6",
                                                 "k7", "k8", "k9", "k10"})});
    for (int t = 0; t < 20; ++t) {
        std::vector<std::string> keys;
        for (int i = 1; i <= 10; ++i) {
            if (rng.uniform01() < 0.7) keys.push_back("k" + std::to_string(i));
        }
        while (keys.size() < 2) keys.push_back("x" + std::to_string(rng.uniform_index(100)));
        std::vector<std::string> vals;
        for (std::size_t i = 0; i < keys.size(); ++i) {
            vals.push_back("v" + std::to_string(t) + "_" + std::to_string(i));
        }
        std::string id = "t" + std::to_string(t) + ".csv";
        repo.tables[id] =
            make_table(id, {text_column("k", keys), text_column("v", vals)});
    }
    auto idx = JoinIndex::build(repo, 128);
    std::set<std::string> prev;
    bool first = true;
    for (double thr : {0.3, 0.5, 0.7, 0.9}) {
        auto augs = generate_candidates(d_in, idx, repo, thr, 1);
        std::set<std::string> cur;
        for (const auto& a : augs) cur.insert(a.id);
        if (!first) {
            CHECK(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
        }
        prev = cur;
        first = false;
    }
}

TEST_CASE("sketch decisions agree with exact containment on most pairs") {
    Rng rng(29);
    int agree = 0;
    int total = 0;
    const double thr = 0.6;
    for (int rep = 0; rep < 300; ++rep) {
        // fresh value universe per pair, as distinct tables would have
        const std::string salt = "_r" + std::to_string(rep);
        const int na = 40 + static_cast<int>(rng.uniform_index(400));
        const int overlap = static_cast<int>(rng.uniform_index(na + 1));
        std::vector<std::string> va, vb;
        for (int i = 0; i < na; ++i) va.push_back("s" + std::to_string(i) + salt);
        for (int i = 0; i < overlap; ++i) vb.push_back("s" + std::to_string(i) + salt);
        const int nb_extra = 20 + static_cast<int>(rng.uniform_index(300));
        for (int i = 0; i < nb_extra; ++i) vb.push_back("t" + std::to_string(i) + salt);

        auto ca = text_column("a", va);
        auto cb = text_column("b", vb);
        Repository repo;
        repo.tables["t.csv"] = make_table("t.csv", {cb});
        auto idx = JoinIndex::build(repo, 128);
        auto sa = idx.make_sketch({"q", 0}, ca);

        JoinIndex::Sketch sketch_only_a = sa;
        sketch_only_a.small_set.clear();
        JoinIndex::Sketch sketch_only_b = idx.sketches()[0];
        sketch_only_b.small_set.clear();

        const bool exact_dec = exact_containment(ca, cb) >= thr;
        const bool sketch_dec =
            JoinIndex::containment(sketch_only_a, sketch_only_b) >= thr;
        agree += (exact_dec == sketch_dec) ? 1 : 0;
        ++total;
    }
    CHECK(static_cast<double>(agree) / total >= 0.95);
}

TEST_CASE("materialize aggregates one-to-many matches") {
    Table base = make_table("din.csv", {text_column("k", {"a", "b"})});
    Repository repo;
    Column keys = text_column("k", {"a", "a", "b"});
    Column nums;
    nums.name = "n";
    nums.values = {Cell("1"), Cell("3"), Cell("5")};
    nums.dtype = infer_dtype(nums.values);
    nums.distinct_count = count_distinct(nums.values);
    repo.tables["t.csv"] = make_table("t.csv", {keys, nums});

    Augmentation aug;
    aug.path.edges.push_back({{"din.csv", 0}, {"t.csv", 0}, 1.0});
    aug.column_index = 1;
    aug.id = make_aug_id(aug.path, 1);

    Table out = materialize(base, std::span(&aug, 1), repo);
    REQUIRE(out.columns.size() == 2);
    CHECK(parse_real(*out.columns[1].values[0]).value() == doctest::Approx(2.0));
    CHECK(parse_real(*out.columns[1].values[1]).value() == doctest::Approx(5.0));
}

TEST_CASE("materialize mode aggregation breaks ties lexicographically") {
    Table base = make_table("din.csv", {text_column("k", {"a"})});
    Repository repo;
    repo.tables["t.csv"] = make_table(
        "t.csv", {text_column("k", {"a", "a"}), text_column("v", {"yy", "xx"})});
    Augmentation aug;
    aug.path.edges.push_back({{"din.csv", 0}, {"t.csv", 0}, 1.0});
    aug.column_index = 1;
    aug.id = make_aug_id(aug.path, 1);
    Table out = materialize(base, std::span(&aug, 1), repo);
    CHECK(*out.columns[1].values[0] == "xx");
}

TEST_CASE("unmatched rows get null, row count unchanged") {
    Table base = make_table("din.csv", {text_column("k", {"a", "c"})});
    Repository repo;
    repo.tables["t.csv"] =
        make_table("t.csv", {text_column("k", {"a", "b"}), text_column("v", {"p", "q"})});
    Augmentation aug;
    aug.path.edges.push_back({{"din.csv", 0}, {"t.csv", 0}, 1.0});
    aug.column_index = 1;
    aug.id = make_aug_id(aug.path, 1);
    Table out = materialize(base, std::span(&aug, 1), repo);
    CHECK(out.row_count == 2);
    CHECK(out.columns[1].values[0].has_value());
    CHECK_FALSE(out.columns[1].values[1].has_value());
}

TEST_CASE("empty augmentation set returns the base unchanged") {
    Table base = make_table("din.csv", {text_column("k", {"a", "b"})});
    Repository repo;
    Table out = materialize(base, {}, repo);
    CHECK(out.columns.size() == base.columns.size());
    CHECK(out.row_count == base.row_count);
}

TEST_CASE("missing join key column raises KeyColumnMissing") {
    Table base = make_table("din.csv", {text_column("k", {"a"})});
    Repository repo;
    repo.tables["t.csv"] =
        make_table("t.csv", {text_column("k", {"a"}), text_column("v", {"p"})});
    Augmentation aug;
    aug.path.edges.push_back({{"din.csv", 7}, {"t.csv", 0}, 1.0});
    aug.column_index = 1;
    aug.id = make_aug_id(aug.path, 1);
    CHECK_THROWS_AS(materialize(base, std::span(&aug, 1), repo), KeyColumnMissing);
}

TEST_CASE("index json round-trip preserves containment decisions") {
    ChainFixture fx;
    auto idx = JoinIndex::build(fx.repo, 64);
    auto idx2 = JoinIndex::from_json(idx.to_json());
    CHECK(idx2.repo_hash() == idx.repo_hash());
    REQUIRE(idx2.sketches().size() == idx.sketches().size());
    auto a1 = generate_candidates(fx.d_in, idx, fx.repo, 0.6, 2);
    auto a2 = generate_candidates(fx.d_in, idx2, fx.repo, 0.6, 2);
    REQUIRE(a1.size() == a2.size());
    for (std::size_t i = 0; i < a1.size(); ++i) CHECK(a1[i].id == a2[i].id);
}
