#pragma once

#include <string>

#include "metam/search.hpp"

namespace metam {

enum class Strategy { Metam, Mw, Overlap, Uniform, JoinEverything };

std::string strategy_name(Strategy s);
Strategy parse_strategy(const std::string& name);

struct MwParams {
    double eta = 0.5;
};

// Multiplicative weights over profile experts: each profile ranks the
// unqueried candidates by its own value, an expert is sampled proportionally
// to its weight each round, and the chosen expert's weight grows with the
// clamped utility gain it produced.
Solution run_mw(const Table& d_in, const Repository& repo, const UtilityTask& task,
                const SearchConfig& config, const SearchInputs& inputs,
                const MwParams& mw = {});

// queries in descending overlap-profile order, ties by id
Solution run_overlap(const Table& d_in, const Repository& repo, const UtilityTask& task,
                     const SearchConfig& config, const SearchInputs& inputs);

// seeded uniform permutation without replacement
Solution run_uniform(const Table& d_in, const Repository& repo, const UtilityTask& task,
                     const SearchConfig& config, const SearchInputs& inputs);

// one evaluation of everything at once, guarded by a column cap
Solution run_join_everything(const Table& d_in, const Repository& repo,
                             const UtilityTask& task, const SearchConfig& config,
                             const SearchInputs& inputs, std::size_t column_cap = 500);

Solution run_strategy(Strategy s, const Table& d_in, const Repository& repo,
                      const UtilityTask& task, const SearchConfig& config,
                      const SearchInputs& inputs);

}  // namespace metam
