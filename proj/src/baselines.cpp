#include "metam/baselines.hpp"

#include <algorithm>

#include "metam/errors.hpp"

namespace metam {

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Metam: return "metam";
        case Strategy::Mw: return "mw";
        case Strategy::Overlap: return "overlap";
        case Strategy::Uniform: return "uniform";
        case Strategy::JoinEverything: return "join-everything";
    }
    return "unknown";
}

Strategy parse_strategy(const std::string& name) {
    const std::string n = to_lower(trim(name));
    if (n == "metam") return Strategy::Metam;
    if (n == "mw") return Strategy::Mw;
    if (n == "overlap") return Strategy::Overlap;
    if (n == "uniform") return Strategy::Uniform;
    if (n == "join-everything" || n == "join_everything") return Strategy::JoinEverything;
    throw ConfigError("unknown strategy: " + name);
}

namespace {

// Shared loop for the one-at-a-time baselines: a provider hands out the next
// candidate, every probe runs under the monotone-accept discipline, stopping
// criteria and the final minimality pass match the main engine.
class CandidateProvider {
public:
    virtual ~CandidateProvider() = default;
    virtual const std::string* next() = 0;            // nullptr = exhausted
    virtual void reward(double clamped_gain) { (void)clamped_gain; }
};

Solution greedy_accept_run(const Table& d_in, const Repository& repo,
                           const UtilityTask& task, const SearchConfig& config,
                           const SearchInputs& inputs, CandidateProvider& provider) {
    EvalContext eval(d_in, repo, task, inputs, config);
    Solution out;
    out.profile_names = inputs.registry.names();

    try {
        const double base = eval.evaluate({}, Mechanism::Monotonicity);
        MonotonicCertifier certifier(base);
        std::vector<std::string> accepted;

        if (config.theta > base) {
            for (;;) {
                if (check_stop(certifier.accepted(), eval, accepted.size(), false, config)) {
                    break;
                }
                const std::string* id = provider.next();
                if (!id) break;  // exhausted
                std::vector<std::string> probe = accepted;
                probe.push_back(*id);
                const double u = eval.evaluate(probe, Mechanism::Sequential);
                const double gain = std::clamp(u - certifier.accepted(), 0.0, 1.0);
                if (certifier.try_accept(u)) accepted = std::move(probe);
                provider.reward(gain);
            }
        }

        double achieved = certifier.accepted();
        auto [minimal, final_utility] =
            identify_minimal(accepted, achieved, config.theta, eval);
        out.augmentation_ids = minimal;
        out.utility = final_utility;
        out.base_utility = base;
        out.reached_theta = final_utility >= config.theta;
        out.accepted_trajectory = certifier.trajectory();
    } catch (const TaskFailure& e) {
        out.aborted = true;
        out.error = e.what();
    }

    out.query_count = eval.query_count();
    out.query_log = eval.take_log();
    for (const auto& rec : out.query_log) {
        if (rec.utility >= config.theta) {
            out.queries_to_theta = rec.index;
            break;
        }
    }
    return out;
}

class RankedProvider : public CandidateProvider {
public:
    explicit RankedProvider(std::vector<std::string> order) : order_(std::move(order)) {}
    const std::string* next() override {
        if (at_ >= order_.size()) return nullptr;
        return &order_[at_++];
    }

private:
    std::vector<std::string> order_;
    std::size_t at_ = 0;
};

class MwProvider : public CandidateProvider {
public:
    MwProvider(const SearchInputs& inputs, double eta, std::uint64_t seed)
        : eta_(eta), rng_(Rng(seed).fork(fnv1a64("mw"))) {
        const std::size_t l = inputs.registry.size();
        weights_.assign(l, 1.0);
        rankings_.resize(l);
        for (std::size_t e = 0; e < l; ++e) {
            std::vector<std::pair<double, std::string>> scored;
            scored.reserve(inputs.ids.size());
            for (const auto& id : inputs.ids) {
                scored.emplace_back(-inputs.profiles.at(id).values[e], id);
            }
            std::sort(scored.begin(), scored.end());  // descending value, ties by id
            for (auto& [v, id] : scored) rankings_[e].push_back(std::move(id));
        }
    }

    const std::string* next() override {
        double total = 0.0;
        for (double w : weights_) total += w;
        double draw = rng_.uniform01() * total;
        std::size_t expert = weights_.size() - 1;
        for (std::size_t e = 0; e < weights_.size(); ++e) {
            draw -= weights_[e];
            if (draw < 0.0) {
                expert = e;
                break;
            }
        }
        last_expert_ = expert;
        for (const auto& id : rankings_[expert]) {
            if (!queried_.count(id)) {
                queried_.insert(id);
                last_pick_ = id;
                return &last_pick_;
            }
        }
        return nullptr;  // every candidate queried
    }

    void reward(double clamped_gain) override {
        weights_[last_expert_] *= 1.0 + eta_ * clamped_gain;
    }

    const std::vector<double>& weights() const { return weights_; }

private:
    double eta_;
    Rng rng_;
    std::vector<double> weights_;
    std::vector<std::vector<std::string>> rankings_;
    std::set<std::string> queried_;
    std::size_t last_expert_ = 0;
    std::string last_pick_;
};

}  // namespace

Solution run_mw(const Table& d_in, const Repository& repo, const UtilityTask& task,
                const SearchConfig& config, const SearchInputs& inputs,
                const MwParams& mw) {
    config.validate();
    MwProvider provider(inputs, mw.eta, config.seed);
    Solution s = greedy_accept_run(d_in, repo, task, config, inputs, provider);
    s.beta = provider.weights();
    return s;
}

Solution run_overlap(const Table& d_in, const Repository& repo, const UtilityTask& task,
                     const SearchConfig& config, const SearchInputs& inputs) {
    config.validate();
    std::size_t overlap_idx = inputs.registry.size();
    for (std::size_t i = 0; i < inputs.registry.size(); ++i) {
        if (inputs.registry.profiles[i].kind == ProfileKind::Overlap) overlap_idx = i;
    }
    if (overlap_idx == inputs.registry.size()) {
        throw ConfigError("overlap strategy needs the overlap profile registered");
    }
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& id : inputs.ids) {
        scored.emplace_back(-inputs.profiles.at(id).values[overlap_idx], id);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<std::string> order;
    order.reserve(scored.size());
    for (auto& [v, id] : scored) order.push_back(std::move(id));
    RankedProvider provider(std::move(order));
    return greedy_accept_run(d_in, repo, task, config, inputs, provider);
}

Solution run_uniform(const Table& d_in, const Repository& repo, const UtilityTask& task,
                     const SearchConfig& config, const SearchInputs& inputs) {
    config.validate();
    std::vector<std::string> order = inputs.ids;
    Rng rng = Rng(config.seed).fork(fnv1a64("uniform"));
    rng.shuffle(order);
    RankedProvider provider(std::move(order));
    return greedy_accept_run(d_in, repo, task, config, inputs, provider);
}

Solution run_join_everything(const Table& d_in, const Repository& repo,
                             const UtilityTask& task, const SearchConfig& config,
                             const SearchInputs& inputs, std::size_t column_cap) {
    config.validate();
    if (inputs.ids.size() + d_in.columns.size() > column_cap) {
        throw TooWide("join-everything would materialize " +
                      std::to_string(inputs.ids.size() + d_in.columns.size()) +
                      " columns (cap " + std::to_string(column_cap) + ")");
    }
    EvalContext eval(d_in, repo, task, inputs, config);
    Solution out;
    out.profile_names = inputs.registry.names();
    try {
        const double base = eval.evaluate({}, Mechanism::Monotonicity);
        out.base_utility = base;
        MonotonicCertifier certifier(base);
        double u = base;
        if (!inputs.ids.empty()) {
            u = eval.evaluate(inputs.ids, Mechanism::Sequential);
            if (certifier.try_accept(u)) out.augmentation_ids = inputs.ids;
        }
        out.utility = certifier.accepted();
        out.reached_theta = out.utility >= config.theta;
        out.accepted_trajectory = certifier.trajectory();
    } catch (const TaskFailure& e) {
        out.aborted = true;
        out.error = e.what();
    }
    out.query_count = eval.query_count();
    out.query_log = eval.take_log();
    for (const auto& rec : out.query_log) {
        if (rec.utility >= config.theta) {
            out.queries_to_theta = rec.index;
            break;
        }
    }
    return out;
}

Solution run_strategy(Strategy s, const Table& d_in, const Repository& repo,
                      const UtilityTask& task, const SearchConfig& config,
                      const SearchInputs& inputs) {
    switch (s) {
        case Strategy::Metam: return run_metam(d_in, repo, task, config, inputs);
        case Strategy::Mw: return run_mw(d_in, repo, task, config, inputs);
        case Strategy::Overlap: return run_overlap(d_in, repo, task, config, inputs);
        case Strategy::Uniform: return run_uniform(d_in, repo, task, config, inputs);
        case Strategy::JoinEverything:
            return run_join_everything(d_in, repo, task, config, inputs);
    }
    throw ConfigError("unknown strategy");
}

}  // namespace metam
