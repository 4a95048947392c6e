#include "metam/search.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "metam/errors.hpp"

namespace metam {

std::string mechanism_name(Mechanism m) {
    switch (m) {
        case Mechanism::Sequential: return "sequential";
        case Mechanism::Group: return "group";
        case Mechanism::Homogeneity: return "homogeneity";
        case Mechanism::Minimality: return "minimality";
        case Mechanism::Monotonicity: return "monotonicity";
    }
    return "unknown";
}

void SearchConfig::validate() const {
    if (theta <= 0.0 || theta > 1.0) throw ConfigError("theta must be in (0,1]");
    if (epsilon <= 0.0 || epsilon > 1.0) throw ConfigError("epsilon must be in (0,1]");
    if (tau && *tau < 1) throw ConfigError("tau must be >= 1");
    if (containment_threshold <= 0.0 || containment_threshold > 1.0) {
        throw ConfigError("containment threshold must be in (0,1]");
    }
    if (max_hops < 1) throw ConfigError("max-hops must be >= 1");
    if (max_queries < 1) throw ConfigError("max-queries must be >= 1");
}

const Augmentation& SearchInputs::by_id(const std::string& id) const {
    auto it = std::lower_bound(
        candidates.begin(), candidates.end(), id,
        [](const Augmentation& a, const std::string& key) { return a.id < key; });
    if (it == candidates.end() || it->id != id) throw ConfigError("unknown augmentation " + id);
    return *it;
}

SearchInputs build_search_inputs(const Table& d_in, const Repository& repo,
                                 const UtilityTask& task, const ProfileRegistry& registry,
                                 const SearchConfig& config, const JoinIndex* prebuilt) {
    SearchInputs out;
    out.registry = registry;
    out.registry.sample_size = config.sample_size;
    JoinIndex local;
    if (!prebuilt) {
        local = JoinIndex::build(repo, config.signature_size, config.parallel);
        prebuilt = &local;
    }
    out.candidates = generate_candidates(d_in, *prebuilt, repo,
                                         config.containment_threshold, config.max_hops);
    ProfileContext ctx(d_in, repo, out.registry, task.target_column(), config.seed);
    auto vectors = ctx.compute_batch(out.candidates, config.parallel);
    for (std::size_t i = 0; i < out.candidates.size(); ++i) {
        out.ids.push_back(out.candidates[i].id);
        out.profiles.emplace(out.candidates[i].id, std::move(vectors[i]));
    }
    return out;
}

// --- EvalContext -------------------------------------------------------------

EvalContext::EvalContext(const Table& d_in, const Repository& repo,
                         const UtilityTask& task, const SearchInputs& inputs,
                         const SearchConfig& config)
    : d_in_(d_in),
      repo_(repo),
      task_(task),
      inputs_(inputs),
      config_(config),
      start_(std::chrono::steady_clock::now()) {}

std::string EvalContext::canonical_key(std::vector<std::string> ids) {
    std::sort(ids.begin(), ids.end());
    std::string key;
    for (const auto& id : ids) {
        key += id;
        key += '\x1f';
    }
    return key;
}

bool EvalContext::was_evaluated(const std::vector<std::string>& set_ids) const {
    return memo_.count(canonical_key(set_ids)) > 0;
}

bool EvalContext::time_left() const {
    return !config_.max_seconds || elapsed_seconds() < *config_.max_seconds;
}

double EvalContext::elapsed_seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

double EvalContext::evaluate(const std::vector<std::string>& set_ids, Mechanism m) {
    const std::string key = canonical_key(set_ids);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;

    std::vector<Augmentation> augs;
    augs.reserve(set_ids.size());
    for (const auto& id : set_ids) augs.push_back(inputs_.by_id(id));
    const Table joined = materialize(d_in_, augs, repo_, &cache_);
    const double utility = checked_utility(task_, joined);

    QueryRecord rec;
    rec.index = log_.size();
    rec.mechanism = m;
    rec.subset = set_ids;
    std::sort(rec.subset.begin(), rec.subset.end());
    rec.utility = utility;
    log_.push_back(std::move(rec));
    if (m != Mechanism::Minimality) ++counted_;
    memo_.emplace(key, utility);
    return utility;
}

// --- MonotonicCertifier ------------------------------------------------------

MonotonicCertifier::MonotonicCertifier(double base_utility) : trajectory_{base_utility} {}

bool MonotonicCertifier::try_accept(double utility) {
    if (utility <= trajectory_.back()) return false;
    trajectory_.push_back(utility);
    return true;
}

// --- group mechanism ---------------------------------------------------------

std::vector<std::string> thompson_group_draw(
    const std::map<std::string, std::vector<std::string>>& members,
    const std::map<std::string, std::pair<int, int>>& posteriors, std::size_t t,
    Rng& rng) {
    std::vector<std::string> subset;
    std::set<std::string> chosen;
    for (std::size_t pick = 0; pick < t; ++pick) {
        const std::string* best_center = nullptr;
        double best_draw = -1.0;
        for (const auto& [center, ab] : posteriors) {
            const double draw = rng.beta(ab.first, ab.second);
            if (draw > best_draw) {
                best_draw = draw;
                best_center = &center;
            }
        }
        if (!best_center) break;
        auto mit = members.find(*best_center);
        if (mit == members.end()) continue;
        std::vector<const std::string*> open;
        for (const auto& m : mit->second) {
            if (!chosen.count(m)) open.push_back(&m);
        }
        if (open.empty()) continue;
        const auto& picked = *open[rng.uniform_index(open.size())];
        chosen.insert(picked);
        subset.push_back(picked);
    }
    return subset;
}

std::optional<std::vector<std::string>> identify_group(
    const std::map<std::string, std::vector<std::string>>& members,
    const std::map<std::string, std::pair<int, int>>& posteriors, std::size_t& t,
    std::size_t t_cap, Rng& rng,
    const std::function<bool(const std::vector<std::string>&)>& already_queried,
    std::size_t resample_limit) {
    for (int round = 0; round < 2; ++round) {
        for (std::size_t attempt = 0; attempt < resample_limit; ++attempt) {
            auto subset = thompson_group_draw(members, posteriors, t, rng);
            if (!subset.empty() && !already_queried(subset)) return subset;
        }
        if (t >= t_cap) break;
        ++t;  // all small subsets appear exhausted, move to larger ones
    }
    return std::nullopt;
}

// --- minimality --------------------------------------------------------------

std::pair<std::vector<std::string>, double> identify_minimal(
    std::vector<std::string> solution, double achieved_utility, double theta,
    EvalContext& eval) {
    if (solution.empty()) return {solution, achieved_utility};
    const double target = achieved_utility >= theta ? theta : achieved_utility;
    double utility = achieved_utility;
    bool dropped = true;
    while (dropped && solution.size() > 1) {
        dropped = false;
        for (std::size_t pos = solution.size(); pos-- > 0;) {
            if (solution.size() == 1) break;
            std::vector<std::string> without;
            without.reserve(solution.size() - 1);
            for (std::size_t i = 0; i < solution.size(); ++i) {
                if (i != pos) without.push_back(solution[i]);
            }
            const double u = eval.evaluate(without, Mechanism::Minimality);
            if (u >= target) {
                solution = std::move(without);
                utility = u;
                dropped = true;
            }
        }
    }
    return {solution, utility};
}

bool check_stop(double best_utility, const EvalContext& eval, std::size_t solution_size,
                bool exhausted_no_improvement, const SearchConfig& config) {
    if (best_utility >= config.theta) return true;
    if (eval.query_count() >= config.max_queries) return true;
    if (config.max_seconds && eval.elapsed_seconds() >= *config.max_seconds) return true;
    if (config.max_solution_size && solution_size >= *config.max_solution_size) return true;
    return exhausted_no_improvement;
}

// --- the engine --------------------------------------------------------------

namespace {

struct Engine {
    const Table& d_in;
    const Repository& repo;
    const UtilityTask& task;
    const SearchConfig& config;
    const SearchInputs& inputs;

    EvalContext eval;
    ClusterSet clusters;
    std::map<std::string, std::vector<std::string>> members;
    std::map<std::string, std::pair<int, int>> posteriors;
    QualityState quality;
    Rng rng_group;
    Rng rng_homog;

    std::vector<std::string> t_star;  // accepted sequential solution, in order
    std::set<std::string> t_star_set;
    std::vector<std::string> t_grp;  // best group subset
    double u_seq = 0.0;
    double u_grp = 0.0;
    double base = 0.0;
    MonotonicCertifier certifier{0.0};
    std::size_t group_t = 1;
    std::size_t dissolved = 0;
    bool hard_stopped = false;

    Engine(const Table& din, const Repository& r, const UtilityTask& tk,
           const SearchConfig& cfg, const SearchInputs& in)
        : d_in(din),
          repo(r),
          task(tk),
          config(cfg),
          inputs(in),
          eval(din, r, tk, in, cfg),
          clusters(cluster_partition(in.ids, in.profiles, cfg.epsilon, cfg.seed,
                                     cfg.parallel)),
          quality(in.profiles, in.registry.size(), cfg.ridge, cfg.parallel),
          rng_group(Rng(cfg.seed).fork(fnv1a64("group"))),
          rng_homog(Rng(cfg.seed).fork(fnv1a64("homogeneity"))) {
        rebuild_members();
        for (const auto& c : clusters.centers) posteriors.emplace(c, std::make_pair(1, 1));
    }

    void rebuild_members() {
        members.clear();
        for (const auto& [id, center] : clusters.assignment) members[center].push_back(id);
        for (auto& [c, v] : members) std::sort(v.begin(), v.end());
    }

    bool hard_stop() {
        if (!eval.budget_left() || !eval.time_left()) hard_stopped = true;
        return hard_stopped;
    }

    std::vector<std::string> with(const std::vector<std::string>& base_set,
                                  const std::string& extra) const {
        auto out = base_set;
        out.push_back(extra);
        return out;
    }

    // best eligible candidate by quality score; ids are sorted so the first
    // strict max is the lexicographic tie-break winner
    const std::string* pick_sequential(const std::set<std::string>& excluded) const {
        const std::string* best = nullptr;
        double best_q = -1.0;
        for (const auto& id : inputs.ids) {
            if (t_star_set.count(id)) continue;
            if (excluded.count(clusters.center_of(id))) continue;
            const double q = quality.quality(id);
            if (q > best_q) {
                best_q = q;
                best = &id;
            }
        }
        return best;
    }

    // lazily test a cluster the first time the sequential mechanism lands on
    // it; sampled members are real queries and feed the quality state
    void maybe_check_homogeneity(const std::string& center,
                                 std::vector<std::pair<std::string, double>>& q_log) {
        auto status = clusters.homogeneous.find(center);
        if (status == clusters.homogeneous.end() ||
            status->second != ClusterSet::Homogeneity::Untested) {
            return;
        }
        const auto& mem = members.at(center);
        if (mem.size() < config.homogeneity_min_size) return;

        const bool ok = homogeneity_check(
            mem,
            [&](const std::string& id) {
                const double u = eval.evaluate(with(t_star, id), Mechanism::Homogeneity);
                q_log.emplace_back(id, u);
                quality.update(id, u, u_seq, clusters, inputs.profiles);
                return u;
            },
            config.epsilon, rng_homog);
        if (ok) {
            clusters.homogeneous[center] = ClusterSet::Homogeneity::Yes;
            return;
        }
        // P2 failed here: members become singleton clusters with fresh priors
        ++dissolved;
        clusters.dissolve(center);
        posteriors.erase(center);
        for (const auto& m : members.at(center)) {
            posteriors.emplace(m, std::make_pair(1, 1));
        }
        rebuild_members();
    }

    Solution finalize(bool aborted, const std::string& error) {
        std::vector<std::string> chosen = u_seq >= u_grp ? t_star : t_grp;
        double achieved = std::max(u_seq, u_grp);
        std::vector<std::string> minimal = chosen;
        double final_utility = achieved;
        if (!chosen.empty() && !aborted) {
            std::tie(minimal, final_utility) =
                identify_minimal(chosen, achieved, config.theta, eval);
        }

        Solution s;
        s.augmentation_ids = minimal;
        s.utility = final_utility;
        s.base_utility = base;
        s.reached_theta = final_utility >= config.theta;
        s.accepted_trajectory = certifier.trajectory();
        s.beta = quality.weights.beta;
        s.profile_names = inputs.registry.names();
        s.cluster_count = clusters.cluster_count();
        s.dissolved_clusters = dissolved;
        s.query_count = eval.query_count();
        s.aborted = aborted;
        s.error = error;
        s.query_log = eval.take_log();
        for (const auto& rec : s.query_log) {
            if (rec.utility >= config.theta) {
                s.queries_to_theta = rec.index;
                break;
            }
        }
        return s;
    }

    Solution run() {
        base = eval.evaluate({}, Mechanism::Monotonicity);
        u_seq = u_grp = base;
        certifier = MonotonicCertifier(base);
        if (config.theta <= base) return finalize(false, "");

        const std::size_t tau = config.tau.value_or(clusters.cluster_count());

        for (;;) {
            if (check_stop(std::max(u_seq, u_grp), eval, t_star.size(), false, config)) {
                break;
            }
            std::set<std::string> excluded;  // X: one sequential probe per cluster
            std::vector<std::pair<std::string, double>> q_probes;  // Q
            bool seq_exhausted = false;
            bool grp_exhausted = false;
            bool pass_improved = false;
            std::size_t i = 0;

            auto best_probe = [&]() -> double {
                double b = -1.0;
                for (const auto& [id, u] : q_probes) b = std::max(b, u);
                return b;
            };

            while (i < tau || best_probe() <= u_seq) {
                if (hard_stop()) break;

                if (const std::string* pick = pick_sequential(excluded)) {
                    maybe_check_homogeneity(clusters.center_of(*pick), q_probes);
                    if (hard_stop()) break;
                    // dissolution may have re-ranked; re-pick to stay deterministic
                    pick = pick_sequential(excluded);
                    if (pick) {
                        const std::string id = *pick;
                        const double u = eval.evaluate(with(t_star, id), Mechanism::Sequential);
                        excluded.insert(clusters.center_of(id));
                        q_probes.emplace_back(id, u);
                        quality.update(id, u, u_seq, clusters, inputs.profiles);
                        if (u >= config.theta) {
                            ++i;
                            break;  // goal demonstrably reachable, accept below
                        }
                    }
                } else {
                    seq_exhausted = true;
                }
                if (hard_stop()) break;

                std::optional<std::vector<std::string>> subset;
                if (config.group_mechanism) {
                    subset = identify_group(
                        members, posteriors, group_t, inputs.ids.size(), rng_group,
                        [&](const std::vector<std::string>& s) {
                            return eval.was_evaluated(s);
                        },
                        config.group_resample_limit);
                }
                if (subset) {
                    const double before = std::max(base, u_grp);
                    const double u = eval.evaluate(*subset, Mechanism::Group);
                    const bool success = u > before;
                    std::set<std::string> touched;
                    for (const auto& id : *subset) touched.insert(clusters.center_of(id));
                    for (const auto& c : touched) {
                        auto& ab = posteriors.at(c);
                        (success ? ab.first : ab.second) += 1;
                    }
                    if (u > u_grp) {
                        u_grp = u;
                        t_grp = *subset;
                        pass_improved = true;
                    }
                    if (u_grp >= config.theta) {
                        ++i;
                        break;
                    }
                } else {
                    grp_exhausted = true;
                }

                ++i;
                if (seq_exhausted && grp_exhausted) break;
            }

            // accept the best finding of this pass under the monotone wrapper
            const std::string* best_id = nullptr;
            double best_u = -1.0;
            for (const auto& [id, u] : q_probes) {
                if (u > best_u && !t_star_set.count(id)) {
                    best_u = u;
                    best_id = &id;
                }
            }
            if (best_id && best_u >= u_grp) {
                if (certifier.try_accept(best_u)) {
                    t_star.push_back(*best_id);
                    t_star_set.insert(*best_id);
                    u_seq = best_u;
                    pass_improved = true;
                }
            } else if (!t_grp.empty() && u_grp > std::max(best_u, u_seq) && !hard_stopped) {
                // adopting the group set into T* needs one verification query
                std::vector<std::string> merged = t_star;
                for (const auto& id : t_grp) {
                    if (!t_star_set.count(id)) merged.push_back(id);
                }
                if (merged.size() > t_star.size()) {
                    const double u = eval.evaluate(merged, Mechanism::Monotonicity);
                    if (certifier.try_accept(u)) {
                        for (const auto& id : merged) t_star_set.insert(id);
                        t_star = std::move(merged);
                        u_seq = u;
                        pass_improved = true;
                    }
                }
            }

            if (hard_stopped) break;
            const bool exhausted = !pass_improved && seq_exhausted && grp_exhausted;
            if (check_stop(std::max(u_seq, u_grp), eval, t_star.size(), exhausted, config)) {
                break;
            }
        }
        return finalize(false, "");
    }
};

}  // namespace

Solution run_metam(const Table& d_in, const Repository& repo, const UtilityTask& task,
                   const SearchConfig& config) {
    config.validate();
    const auto inputs =
        build_search_inputs(d_in, repo, task, ProfileRegistry::default_set(), config);
    return run_metam(d_in, repo, task, config, inputs);
}

Solution run_metam(const Table& d_in, const Repository& repo, const UtilityTask& task,
                   const SearchConfig& config, const SearchInputs& inputs) {
    config.validate();
    if (inputs.candidates.empty()) {
        SearchInputs empty;
        EvalContext eval(d_in, repo, task, empty, config);
        Solution s;
        s.base_utility = s.utility = eval.evaluate({}, Mechanism::Monotonicity);
        s.reached_theta = s.utility >= config.theta;
        s.accepted_trajectory = {s.utility};
        s.profile_names = inputs.registry.names();
        s.query_count = eval.query_count();
        s.query_log = eval.take_log();
        return s;
    }
    Engine engine(d_in, repo, task, config, inputs);
    try {
        return engine.run();
    } catch (const TaskFailure& e) {
        return engine.finalize(true, e.what());
    }
}

std::optional<std::vector<std::string>> brute_force_optimal(
    const SearchInputs& inputs, const Table& d_in, const Repository& repo,
    const UtilityTask& task, double theta, std::size_t k_max) {
    const std::size_t n = inputs.ids.size();
    if (n > 16) {
        throw TooLarge("brute force over " + std::to_string(n) + " candidates refused");
    }
    JoinMapCache cache;
    auto utility_of = [&](const std::vector<std::string>& set_ids) {
        std::vector<Augmentation> augs;
        for (const auto& id : set_ids) augs.push_back(inputs.by_id(id));
        return checked_utility(task, materialize(d_in, augs, repo, &cache));
    };

    if (utility_of({}) >= theta) return std::vector<std::string>{};
    std::vector<std::size_t> pick;
    for (std::size_t k = 1; k <= std::min(k_max, n); ++k) {
        pick.assign(k, 0);
        for (std::size_t i = 0; i < k; ++i) pick[i] = i;
        for (;;) {
            std::vector<std::string> set_ids;
            for (auto p : pick) set_ids.push_back(inputs.ids[p]);
            if (utility_of(set_ids) >= theta) return set_ids;
            // next combination in lexicographic order
            std::size_t j = k;
            while (j-- > 0) {
                if (pick[j] < n - (k - j)) {
                    ++pick[j];
                    for (std::size_t l = j + 1; l < k; ++l) pick[l] = pick[l - 1] + 1;
                    break;
                }
                if (j == 0) goto next_size;
            }
        }
    next_size:;
    }
    return std::nullopt;
}

// --- serialization -----------------------------------------------------------

std::string Solution::to_json() const {
    nlohmann::json j;
    j["augmentations"] = augmentation_ids;
    j["utility"] = utility;
    j["base_utility"] = base_utility;
    j["reached_theta"] = reached_theta;
    if (queries_to_theta) j["queries_to_theta"] = *queries_to_theta;
    j["query_count"] = query_count;
    j["utility_trajectory"] = accepted_trajectory;
    j["beta"] = beta;
    j["profiles"] = profile_names;
    j["cluster_count"] = cluster_count;
    j["dissolved_clusters"] = dissolved_clusters;
    j["aborted"] = aborted;
    if (!error.empty()) j["error"] = error;
    return j.dump(2);
}

std::string Solution::querylog_jsonl() const {
    std::ostringstream out;
    for (const auto& rec : query_log) {
        nlohmann::json j;
        j["index"] = rec.index;
        j["mechanism"] = mechanism_name(rec.mechanism);
        j["subset"] = rec.subset;
        j["utility"] = rec.utility;
        out << j.dump() << '\n';
    }
    return out.str();
}

}  // namespace metam
