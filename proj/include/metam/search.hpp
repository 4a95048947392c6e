#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "metam/clustering.hpp"
#include "metam/discovery.hpp"
#include "metam/profiles.hpp"
#include "metam/scoring.hpp"
#include "metam/tasks.hpp"

namespace metam {

enum class Mechanism { Sequential, Group, Homogeneity, Minimality, Monotonicity };

std::string mechanism_name(Mechanism m);

struct QueryRecord {
    std::size_t index = 0;  // strictly increasing across the run
    Mechanism mechanism = Mechanism::Sequential;
    std::vector<std::string> subset;  // aug ids joined onto d_in for this query
    double utility = 0.0;
};

struct SearchConfig {
    double theta = 0.8;
    std::optional<std::size_t> tau;  // unset = number of clusters
    double epsilon = 0.05;
    std::size_t max_queries = 1000;
    std::optional<double> max_seconds;
    std::optional<std::size_t> max_solution_size;
    std::uint64_t seed = 0;

    int max_hops = 2;
    double containment_threshold = 0.6;
    std::size_t signature_size = 128;
    std::size_t sample_size = 100;

    std::size_t homogeneity_min_size = 4;
    std::size_t group_resample_limit = 32;
    bool group_mechanism = true;  // ablation switch for the combinatorial side
    double ridge = 1e-3;
    bool parallel = true;

    void validate() const;  // throws ConfigError
};

struct Solution {
    std::vector<std::string> augmentation_ids;  // minimal set, insertion order
    double utility = 0.0;                       // of the final set on d_in
    double base_utility = 0.0;
    bool reached_theta = false;
    std::optional<std::size_t> queries_to_theta;
    std::vector<QueryRecord> query_log;
    std::vector<double> accepted_trajectory;  // starts at the base utility
    std::vector<double> beta;
    std::vector<std::string> profile_names;
    std::size_t cluster_count = 0;
    std::size_t dissolved_clusters = 0;
    std::size_t query_count = 0;  // budget-counted task evaluations
    bool aborted = false;
    std::string error;

    std::string to_json() const;
    std::string querylog_jsonl() const;
};

// candidates + profiles, shared across strategies and with the benchmarks
struct SearchInputs {
    std::vector<Augmentation> candidates;  // sorted by id
    std::map<std::string, ProfileVector> profiles;
    ProfileRegistry registry;
    std::vector<std::string> ids;  // sorted

    const Augmentation& by_id(const std::string& id) const;
};

SearchInputs build_search_inputs(const Table& d_in, const Repository& repo,
                                 const UtilityTask& task, const ProfileRegistry& registry,
                                 const SearchConfig& config,
                                 const JoinIndex* prebuilt = nullptr);

// Evaluation harness shared by the engine and the baselines: materializes
// Γ(d_in, set), runs the task behind the range boundary, logs one QueryRecord
// per distinct evaluation, memoizes exact repeats, and enforces the budget.
class EvalContext {
public:
    EvalContext(const Table& d_in, const Repository& repo, const UtilityTask& task,
                const SearchInputs& inputs, const SearchConfig& config);

    double evaluate(const std::vector<std::string>& set_ids, Mechanism m);
    bool was_evaluated(const std::vector<std::string>& set_ids) const;

    // counting queries exclude the minimality phase
    std::size_t query_count() const { return counted_; }
    bool budget_left() const { return counted_ < config_.max_queries; }
    bool time_left() const;
    double elapsed_seconds() const;
    const std::vector<QueryRecord>& log() const { return log_; }
    std::vector<QueryRecord> take_log() { return std::move(log_); }

private:
    const Table& d_in_;
    const Repository& repo_;
    const UtilityTask& task_;
    const SearchInputs& inputs_;
    const SearchConfig& config_;
    JoinMapCache cache_;
    std::map<std::string, double> memo_;
    std::vector<QueryRecord> log_;
    std::size_t counted_ = 0;
    std::chrono::steady_clock::time_point start_;

    static std::string canonical_key(std::vector<std::string> ids);
};

// Non-decreasing accepted-utility discipline (property P3): a candidate state
// is adopted only when its freshly evaluated utility improves on the accepted
// one; rejected candidates leave the accepted state untouched.
class MonotonicCertifier {
public:
    explicit MonotonicCertifier(double base_utility);
    double accepted() const { return trajectory_.back(); }
    bool try_accept(double utility);
    const std::vector<double>& trajectory() const { return trajectory_; }

private:
    std::vector<double> trajectory_;
};

// Thompson draw: t cluster picks with replacement (Beta posteriors, ties by
// center id), one uniform not-yet-chosen member per pick.
std::vector<std::string> thompson_group_draw(
    const std::map<std::string, std::vector<std::string>>& members,
    const std::map<std::string, std::pair<int, int>>& posteriors, std::size_t t,
    Rng& rng);

// Resamples up to `resample_limit` times past already-queried subsets, then
// grows t once and retries; empty optional means the mechanism is exhausted.
std::optional<std::vector<std::string>> identify_group(
    const std::map<std::string, std::vector<std::string>>& members,
    const std::map<std::string, std::pair<int, int>>& posteriors, std::size_t& t,
    std::size_t t_cap, Rng& rng,
    const std::function<bool(const std::vector<std::string>&)>& already_queried,
    std::size_t resample_limit);

// reverse-insertion-order removal until no single element can be dropped while
// keeping utility at the target (theta, or the achieved utility when below it)
std::pair<std::vector<std::string>, double> identify_minimal(
    std::vector<std::string> solution, double achieved_utility, double theta,
    EvalContext& eval);

bool check_stop(double best_utility, const EvalContext& eval, std::size_t solution_size,
                bool exhausted_no_improvement, const SearchConfig& config);

Solution run_metam(const Table& d_in, const Repository& repo, const UtilityTask& task,
                   const SearchConfig& config);
Solution run_metam(const Table& d_in, const Repository& repo, const UtilityTask& task,
                   const SearchConfig& config, const SearchInputs& inputs);

// exhaustive subset oracle (Theorem-3-style): smallest subset reaching theta,
// sizes 0..k_max, lexicographic tie-break; nullopt when nothing qualifies
std::optional<std::vector<std::string>> brute_force_optimal(
    const SearchInputs& inputs, const Table& d_in, const Repository& repo,
    const UtilityTask& task, double theta, std::size_t k_max);

}  // namespace metam
