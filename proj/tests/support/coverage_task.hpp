#pragma once

// Test-only utility task with exact, instantly computable semantics: each
// augmentation covers a subset of a weighted universe and the utility of a
// table is the covered weight fraction of the columns present. This is the
// classic coverage construction used to stress the search independently of
// any learned model, and it doubles as the independent oracle for the greedy
// bound (optimum by direct enumeration, no table materialization involved).

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "metam/core.hpp"
#include "metam/repository.hpp"
#include "metam/tasks.hpp"

namespace metam::testing {

class CoverageTask final : public UtilityTask {
public:
    CoverageTask(std::map<std::string, std::vector<int>> sets, std::vector<double> weights)
        : sets_(std::move(sets)), weights_(std::move(weights)) {
        for (double w : weights_) total_ += w;
    }

    TaskKind kind() const override { return TaskKind::External; }

    TaskResult evaluate(const Table& t) const override {
        std::vector<std::string> present;
        for (const auto& col : t.columns) {
            if (col.name && sets_.count(*col.name)) present.push_back(*col.name);
        }
        return {coverage_of(present), "coverage"};
    }

    double coverage_of(const std::vector<std::string>& ids) const {
        std::set<int> covered;
        for (const auto& id : ids) {
            auto it = sets_.find(id);
            if (it == sets_.end()) continue;
            covered.insert(it->second.begin(), it->second.end());
        }
        double w = 0.0;
        for (int e : covered) w += weights_[static_cast<std::size_t>(e)];
        return total_ > 0 ? w / total_ : 0.0;
    }

    // best coverage over all subsets of size <= k, by direct enumeration
    double optimum(const std::vector<std::string>& ids, std::size_t k) const {
        double best = 0.0;
        std::vector<std::size_t> pick;
        enumerate(ids, k, 0, pick, best);
        return best;
    }

private:
    std::map<std::string, std::vector<int>> sets_;
    std::vector<double> weights_;
    double total_ = 0.0;

    void enumerate(const std::vector<std::string>& ids, std::size_t k, std::size_t from,
                   std::vector<std::size_t>& pick, double& best) const {
        std::vector<std::string> chosen;
        for (auto p : pick) chosen.push_back(ids[p]);
        best = std::max(best, coverage_of(chosen));
        if (pick.size() == k) return;
        for (std::size_t i = from; i < ids.size(); ++i) {
            pick.push_back(i);
            enumerate(ids, k, i + 1, pick, best);
            pick.pop_back();
        }
    }
};

// n joinable side tables over a shared key; every side table contributes
// exactly one candidate augmentation at one hop
struct CoverageFixture {
    Repository repo;
    Table d_in;
};

inline CoverageFixture make_coverage_fixture(std::size_t n_tables,
                                             std::size_t n_rows = 8) {
    CoverageFixture fx;
    std::vector<std::string> keys;
    for (std::size_t i = 0; i < n_rows; ++i) keys.push_back("row" + std::to_string(i));

    Column key_col;
    key_col.name = "key";
    for (const auto& k : keys) key_col.values.emplace_back(k);
    key_col.dtype = infer_dtype(key_col.values);
    key_col.distinct_count = count_distinct(key_col.values);
    fx.d_in.id = "d_in.csv";
    fx.d_in.row_count = n_rows;
    fx.d_in.columns = {key_col};

    for (std::size_t t = 0; t < n_tables; ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "t%03zu.csv", t);
        Column vals;
        vals.name = "v";
        for (std::size_t i = 0; i < n_rows; ++i) {
            vals.values.emplace_back("val" + std::to_string(t) + "_" + std::to_string(i));
        }
        vals.dtype = infer_dtype(vals.values);
        vals.distinct_count = count_distinct(vals.values);
        Table side;
        side.id = name;
        side.row_count = n_rows;
        side.columns = {key_col, vals};
        side.columns[0].name = "key";
        fx.repo.tables.emplace(side.id, std::move(side));
    }
    return fx;
}

}  // namespace metam::testing
