#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "metam/baselines.hpp"
#include "metam/search.hpp"
#include "metam/tasks.hpp"

namespace metam {

struct SynthSpec {
    std::size_t n_candidates = 200;
    int k_planted = 2;
    std::size_t n_rows = 300;
    double noise_sigma = 0.1;
    TaskKind task_kind = TaskKind::Classification;
    std::uint64_t seed = 0;

    void validate() const;  // 1 <= k_planted <= 5 <= n_candidates
    std::string to_json() const;
    static SynthSpec from_json(const std::string& text);
};

// A generated instance with exact ground truth. The repository mixes the
// planted signal tables with duplicate-heavy noise families (open-data
// corpora are full of near-copies), decoy copies of an input feature that
// rank high on correlation but add nothing, and a few one-off noise tables.
struct SynthInstance {
    Repository repo;
    Table d_in;
    std::vector<std::string> ground_truth;  // aug ids of the planted tables
    double theta = 0.0;
    std::unique_ptr<UtilityTask> task;
    std::vector<std::string> planted_tables;
};

SynthInstance synth_repository(const SynthSpec& spec);

// --- experiment runner -------------------------------------------------------

struct RunCell {
    Strategy strategy = Strategy::Metam;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    bool reached_theta = false;
    std::optional<std::size_t> queries_to_theta;
    std::size_t solution_size = 0;
    std::size_t query_count = 0;
    double wall_seconds = 0.0;
    std::vector<std::pair<std::size_t, double>> curve;  // query index -> best so far
    std::vector<std::string> solution;
    std::vector<double> trajectory;
};

struct Report {
    std::vector<std::string> strategies;
    std::vector<std::uint64_t> seeds;
    double theta = 0.0;
    std::vector<RunCell> cells;

    std::string to_json() const;
    std::string curves_csv() const;  // strategy,seed,query_index,utility

    // median queries-to-theta for one strategy; unreached runs count as +inf
    // and push the median up; nullopt when the median itself is unreached
    std::optional<double> median_queries_to_theta(Strategy s) const;
    double success_rate(Strategy s) const;
};

// every strategy runs on the same instance under the same budget, one cell
// per (strategy, seed); per-run failures are recorded, not fatal
Report run_experiment(const Table& d_in, const Repository& repo, const UtilityTask& task,
                      double theta, const std::vector<Strategy>& strategies,
                      const SearchConfig& config, const std::vector<std::uint64_t>& seeds,
                      const SearchInputs* shared_inputs = nullptr);

// one freshly generated instance per seed, the headline comparison protocol
Report bench_over_instances(const SynthSpec& base_spec,
                            const std::vector<Strategy>& strategies, std::size_t n_seeds,
                            const SearchConfig& config, int extra_noise_profiles = 0);

// --- scalability -------------------------------------------------------------

struct PipelineTiming {
    std::size_t n_candidates = 0;
    double profile_seconds = 0.0;
    double cluster_seconds = 0.0;
    double score_seconds = 0.0;
    double total_seconds = 0.0;  // profile + cluster + score-for-first-query
    std::size_t clusters = 0;
};

PipelineTiming measure_pipeline(std::size_t n_candidates, std::uint64_t seed,
                                bool parallel = true);

// least-squares fit quality of t ~ a + b n over the given timings
double linear_fit_r2(const std::vector<PipelineTiming>& timings);

}  // namespace metam
