#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>

#include "metam/core.hpp"

namespace metam {

enum class TaskKind { Classification, Regression, WhatIf, External };

std::string task_kind_name(TaskKind k);

struct TaskResult {
    double utility = 0.0;  // in [0,1], finite
    std::string details;
};

// Definition of the black box the search queries. Built-ins are pure given
// their seed; one evaluation of `evaluate` is one "query".
class UtilityTask {
public:
    virtual ~UtilityTask() = default;
    virtual TaskResult evaluate(const Table& table) const = 0;
    virtual TaskKind kind() const = 0;
    virtual std::optional<std::string> target_column() const { return std::nullopt; }
};

// seeded 70/30 split, bagged depth-limited trees, macro F-score on validation
std::unique_ptr<UtilityTask> make_classification_task(std::string target,
                                                      std::uint64_t seed,
                                                      int n_trees = 16, int depth = 6);

// target min-max scaled on the train split; returns clamp(1 - MAE, 0, 1)
std::unique_ptr<UtilityTask> make_regression_task(std::string target, std::uint64_t seed,
                                                  int n_trees = 16, int depth = 6);

// declares columns dependent on update_column (pearson t-test / chi-square at
// p <= alpha) and scores the fraction of ground truth recovered
std::unique_ptr<UtilityTask> make_whatif_task(std::string update_column,
                                              std::set<std::string> ground_truth,
                                              double alpha = 0.05);

// writes the table to a temp csv, runs `command <csv-path>`, parses the last
// non-empty stdout line as a decimal in [0,1]
std::unique_ptr<UtilityTask> make_external_task(std::string command,
                                                double timeout_seconds = 120.0);

// task config file: {"kind": ..., "target": ..., "seed": ..., "command"?,
// "alpha"?, "ground_truth"?}
std::unique_ptr<UtilityTask> load_task_config(const std::string& json_text);
std::unique_ptr<UtilityTask> load_task_file(const std::string& path);

// range/finiteness boundary shared by every caller of a task
double checked_utility(const UtilityTask& task, const Table& table,
                       std::string* details = nullptr);

}  // namespace metam
