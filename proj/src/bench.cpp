#include "metam/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "metam/errors.hpp"

namespace metam {

void SynthSpec::validate() const {
    if (k_planted < 1 || k_planted > 5 || static_cast<std::size_t>(k_planted) > n_candidates ||
        n_candidates < 5) {
        throw ConfigError("synth spec needs 1 <= k_planted <= 5 <= n_candidates");
    }
    if (n_rows < 40) throw ConfigError("synth spec needs at least 40 rows");
    if (noise_sigma < 0) throw ConfigError("noise_sigma must be >= 0");
    if (task_kind == TaskKind::External) throw ConfigError("synth tasks are built-ins");
}

std::string SynthSpec::to_json() const {
    nlohmann::json j;
    j["n_candidates"] = n_candidates;
    j["k_planted"] = k_planted;
    j["n_rows"] = n_rows;
    j["noise_sigma"] = noise_sigma;
    j["task_kind"] = task_kind_name(task_kind);
    j["seed"] = seed;
    return j.dump(2);
}

SynthSpec SynthSpec::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid synth spec: ") + e.what());
    }
    SynthSpec s;
    s.n_candidates = j.value("n_candidates", s.n_candidates);
    s.k_planted = j.value("k_planted", s.k_planted);
    s.n_rows = j.value("n_rows", s.n_rows);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.seed = j.value("seed", s.seed);
    const std::string kind = j.value("task_kind", "classification");
    if (kind == "classification") {
        s.task_kind = TaskKind::Classification;
    } else if (kind == "regression") {
        s.task_kind = TaskKind::Regression;
    } else if (kind == "whatif") {
        s.task_kind = TaskKind::WhatIf;
    } else {
        throw ConfigError("unknown task_kind: " + kind);
    }
    s.validate();
    return s;
}

namespace {

Column column_from_strings(std::string name, std::vector<std::string> vals) {
    Column c;
    c.name = std::move(name);
    for (auto& v : vals) c.values.emplace_back(std::move(v));
    c.dtype = infer_dtype(c.values);
    c.distinct_count = count_distinct(c.values);
    return c;
}

Column column_from_reals(std::string name, const std::vector<double>& vals) {
    std::vector<std::string> s;
    s.reserve(vals.size());
    for (double v : vals) s.push_back(format_real(v));
    return column_from_strings(std::move(name), std::move(s));
}

Table side_table(const std::string& id, const std::vector<std::string>& keys,
                 const std::vector<double>& key_values, Rng& shuffle_rng) {
    // every side table covers the full key set in its own row order
    std::vector<std::size_t> order(keys.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_rng.shuffle(order);
    std::vector<std::string> k;
    std::vector<double> v;
    k.reserve(order.size());
    v.reserve(order.size());
    for (auto r : order) {
        k.push_back(keys[r]);
        v.push_back(key_values[r]);
    }
    Table t;
    t.id = id;
    t.row_count = keys.size();
    t.columns = {column_from_strings("key", k), column_from_reals("v", v)};
    return t;
}

struct Layout {
    std::vector<std::size_t> plants;              // table indices
    std::vector<std::vector<std::size_t>> families;  // families[0] = decoy copies
    std::vector<std::size_t> uniques;
};

Layout plan_layout(const SynthSpec& spec, Rng& rng) {
    const std::size_t n = spec.n_candidates;
    const auto k = static_cast<std::size_t>(spec.k_planted);
    std::vector<std::size_t> slots(n);
    for (std::size_t i = 0; i < n; ++i) slots[i] = i;
    rng.shuffle(slots);

    Layout out;
    std::size_t at = 0;
    for (std::size_t j = 0; j < k; ++j) out.plants.push_back(slots[at++]);

    const std::size_t n_unique =
        std::min<std::size_t>(2, n >= k + 4 ? 2 : 0);
    const std::size_t remaining = n - k - std::min(n_unique, n - k);
    const std::size_t n_families =
        remaining == 0 ? 0 : std::min<std::size_t>(2, std::max<std::size_t>(1, remaining / 2));

    out.families.resize(n_families);
    for (std::size_t f = 0; f < n_families; ++f) {
        const std::size_t size = remaining / n_families + (f < remaining % n_families ? 1 : 0);
        for (std::size_t s = 0; s < size; ++s) out.families[f].push_back(slots[at++]);
    }
    while (at < n) out.uniques.push_back(slots[at++]);
    return out;
}

std::string table_name(std::size_t idx) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "t%04zu.csv", idx);
    return buf;
}

}  // namespace

SynthInstance synth_repository(const SynthSpec& spec) {
    spec.validate();
    Rng root(spec.seed);
    Rng rng_layout = root.fork(fnv1a64("layout"));
    Rng rng_data = root.fork(fnv1a64("data"));
    Rng rng_rows = root.fork(fnv1a64("rows"));

    const std::size_t n_rows = spec.n_rows;
    std::vector<std::string> keys(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "k%06zu", i);
        keys[i] = buf;
    }

    // input features: b0 is the decoy source the target also leans on
    std::vector<double> b0(n_rows), f1(n_rows), f2(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) {
        b0[i] = rng_data.normal();
        f1[i] = rng_data.normal();
        f2[i] = rng_data.normal();
    }

    const Layout layout = plan_layout(spec, rng_layout);
    const auto k = static_cast<std::size_t>(spec.k_planted);

    // planted signals and the target
    std::vector<std::vector<double>> plant_vals(k, std::vector<double>(n_rows));
    std::vector<double> update_col(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) update_col[i] = rng_data.normal();
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < n_rows; ++i) {
            // indicator-style signal columns: a single split captures them
            plant_vals[j][i] = spec.task_kind == TaskKind::WhatIf
                                   ? update_col[i] + 0.5 * rng_data.normal()
                                   : (rng_data.normal() >= 0 ? 1.0 : -1.0);
        }
    }
    std::vector<double> plant_weight(k);
    for (std::size_t j = 0; j < k; ++j) plant_weight[j] = 1.1 + 0.2 * rng_data.uniform01();
    const double decoy_weight = 1.4;

    std::vector<double> score(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) {
        double s = decoy_weight * b0[i];
        for (std::size_t j = 0; j < k; ++j) {
            s += plant_weight[j] * (plant_vals[j][i] >= 0 ? 1.0 : -1.0);
        }
        score[i] = s + spec.noise_sigma * rng_data.normal();
    }

    SynthInstance out;
    out.d_in.id = "d_in.csv";
    out.d_in.row_count = n_rows;
    out.d_in.columns.push_back(column_from_strings("key", keys));
    out.d_in.columns.push_back(column_from_reals("b0", b0));
    out.d_in.columns.push_back(column_from_reals("f1", f1));
    out.d_in.columns.push_back(column_from_reals("f2", f2));
    switch (spec.task_kind) {
        case TaskKind::Classification: {
            std::vector<std::string> y(n_rows);
            for (std::size_t i = 0; i < n_rows; ++i) y[i] = score[i] >= 0 ? "hi" : "lo";
            out.d_in.columns.push_back(column_from_strings("target", std::move(y)));
            out.task = make_classification_task("target", spec.seed);
            break;
        }
        case TaskKind::Regression:
            out.d_in.columns.push_back(column_from_reals("target", score));
            out.task = make_regression_task("target", spec.seed);
            break;
        case TaskKind::WhatIf:
            out.d_in.columns.push_back(column_from_reals("target", update_col));
            break;  // task built after ground truth ids are known
        default:
            throw ConfigError("synth tasks are built-ins");
    }

    // side tables
    for (std::size_t j = 0; j < k; ++j) {
        const auto id = table_name(layout.plants[j]);
        out.repo.tables.emplace(id, side_table(id, keys, plant_vals[j], rng_rows));
        out.planted_tables.push_back(id);
    }
    for (std::size_t f = 0; f < layout.families.size(); ++f) {
        std::vector<double> vals(n_rows);
        if (f == 0) {
            vals = b0;  // decoys: exact copies of an input feature
        } else {
            for (auto& v : vals) v = rng_data.normal();
        }
        // family members are byte-identical twins under different names
        Rng family_rows = rng_rows.fork(f + 1);
        Rng frozen = family_rows;
        for (auto idx : layout.families[f]) {
            Rng per_table = frozen;
            const auto id = table_name(idx);
            out.repo.tables.emplace(id, side_table(id, keys, vals, per_table));
        }
    }
    for (auto idx : layout.uniques) {
        std::vector<double> vals(n_rows);
        for (auto& v : vals) v = rng_data.normal();
        const auto id = table_name(idx);
        out.repo.tables.emplace(id, side_table(id, keys, vals, rng_rows));
    }

    // ground truth through the real candidate generator (1-hop joins)
    auto index = JoinIndex::build(out.repo, 128, false);
    auto candidates = generate_candidates(out.d_in, index, out.repo, 0.6, 1);
    if (candidates.size() != spec.n_candidates) {
        throw ConfigError("synth generator produced " + std::to_string(candidates.size()) +
                          " candidates, expected " + std::to_string(spec.n_candidates));
    }
    std::vector<Augmentation> planted_augs;
    for (const auto& aug : candidates) {
        if (std::find(out.planted_tables.begin(), out.planted_tables.end(),
                      aug.path.terminal().table) != out.planted_tables.end()) {
            out.ground_truth.push_back(aug.id);
            planted_augs.push_back(aug);
        }
    }
    if (out.ground_truth.size() != k) throw ConfigError("ground truth identification failed");

    if (spec.task_kind == TaskKind::WhatIf) {
        out.task = make_whatif_task(
            "target", std::set<std::string>(out.ground_truth.begin(), out.ground_truth.end()));
    }

    // theta: what the planted set actually achieves, minus a small margin
    const Table informed = materialize(out.d_in, planted_augs, out.repo);
    out.theta = std::clamp(checked_utility(*out.task, informed) - 0.02, 0.01, 1.0);
    return out;
}

// --- experiment runner -------------------------------------------------------

Report run_experiment(const Table& d_in, const Repository& repo, const UtilityTask& task,
                      double theta, const std::vector<Strategy>& strategies,
                      const SearchConfig& config, const std::vector<std::uint64_t>& seeds,
                      const SearchInputs* shared_inputs) {
    if (strategies.empty() || seeds.empty()) {
        throw ConfigError("run_experiment needs at least one strategy and one seed");
    }
    SearchInputs local;
    if (!shared_inputs) {
        SearchConfig build_cfg = config;
        build_cfg.theta = theta;
        local = build_search_inputs(d_in, repo, task, ProfileRegistry::default_set(),
                                    build_cfg);
        shared_inputs = &local;
    }

    Report report;
    report.theta = theta;
    report.seeds = seeds;
    for (auto s : strategies) report.strategies.push_back(strategy_name(s));

    for (auto strategy : strategies) {
        for (auto seed : seeds) {
            RunCell cell;
            cell.strategy = strategy;
            cell.seed = seed;
            SearchConfig cfg = config;
            cfg.theta = theta;
            cfg.seed = seed;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                Solution sol = run_strategy(strategy, d_in, repo, task, cfg, *shared_inputs);
                cell.failed = sol.aborted;
                cell.error = sol.error;
                cell.reached_theta = sol.reached_theta;
                cell.queries_to_theta = sol.queries_to_theta;
                cell.solution_size = sol.augmentation_ids.size();
                cell.solution = sol.augmentation_ids;
                cell.query_count = sol.query_count;
                cell.trajectory = sol.accepted_trajectory;
                double best = 0.0;
                bool first = true;
                for (const auto& rec : sol.query_log) {
                    best = first ? rec.utility : std::max(best, rec.utility);
                    first = false;
                    cell.curve.emplace_back(rec.index, best);
                }
            } catch (const std::exception& e) {
                cell.failed = true;
                cell.error = e.what();
            }
            cell.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            report.cells.push_back(std::move(cell));
        }
    }
    return report;
}

Report bench_over_instances(const SynthSpec& base_spec,
                            const std::vector<Strategy>& strategies, std::size_t n_seeds,
                            const SearchConfig& config, int extra_noise_profiles) {
    Report merged;
    merged.theta = 0.0;
    for (auto s : strategies) merged.strategies.push_back(strategy_name(s));
    for (std::size_t i = 0; i < n_seeds; ++i) {
        SynthSpec spec = base_spec;
        spec.seed = base_spec.seed + i;
        merged.seeds.push_back(spec.seed);
        SynthInstance inst = synth_repository(spec);

        SearchConfig cfg = config;
        cfg.theta = inst.theta;
        cfg.seed = spec.seed;
        cfg.max_hops = 1;  // planted joins are direct; side tables all interjoin

        auto registry = ProfileRegistry::default_set();
        registry.add_noise_profiles(extra_noise_profiles);
        registry.sample_size = cfg.sample_size;
        const auto inputs =
            build_search_inputs(inst.d_in, inst.repo, *inst.task, registry, cfg);

        Report one = run_experiment(inst.d_in, inst.repo, *inst.task, inst.theta,
                                    strategies, cfg, {spec.seed}, &inputs);
        merged.theta = inst.theta;  // last instance's theta, cells carry their own story
        for (auto& cell : one.cells) merged.cells.push_back(std::move(cell));
    }
    return merged;
}

std::optional<double> Report::median_queries_to_theta(Strategy s) const {
    std::vector<double> vals;
    for (const auto& c : cells) {
        if (c.strategy != s) continue;
        vals.push_back(c.queries_to_theta ? static_cast<double>(*c.queries_to_theta)
                                          : std::numeric_limits<double>::infinity());
    }
    if (vals.empty()) return std::nullopt;
    std::sort(vals.begin(), vals.end());
    const double med = vals.size() % 2 ? vals[vals.size() / 2]
                                       : 0.5 * (vals[vals.size() / 2 - 1] + vals[vals.size() / 2]);
    if (std::isinf(med)) return std::nullopt;
    return med;
}

double Report::success_rate(Strategy s) const {
    std::size_t n = 0, ok = 0;
    for (const auto& c : cells) {
        if (c.strategy != s) continue;
        ++n;
        if (c.reached_theta) ++ok;
    }
    return n == 0 ? 0.0 : static_cast<double>(ok) / static_cast<double>(n);
}

std::string Report::to_json() const {
    nlohmann::json j;
    j["strategies"] = strategies;
    j["seeds"] = seeds;
    j["theta"] = theta;
    auto& cells_j = j["cells"];
    cells_j = nlohmann::json::array();
    for (const auto& c : cells) {
        nlohmann::json cj;
        cj["strategy"] = strategy_name(c.strategy);
        cj["seed"] = c.seed;
        cj["failed"] = c.failed;
        if (!c.error.empty()) cj["error"] = c.error;
        cj["reached_theta"] = c.reached_theta;
        if (c.queries_to_theta) cj["queries_to_theta"] = *c.queries_to_theta;
        cj["solution_size"] = c.solution_size;
        cj["solution"] = c.solution;
        cj["query_count"] = c.query_count;
        cj["wall_seconds"] = c.wall_seconds;
        cj["trajectory"] = c.trajectory;
        cells_j.push_back(std::move(cj));
    }
    return j.dump(2);
}

std::string Report::curves_csv() const {
    std::ostringstream out;
    out << "strategy,seed,query_index,utility\n";
    for (const auto& c : cells) {
        for (const auto& [idx, u] : c.curve) {
            out << strategy_name(c.strategy) << ',' << c.seed << ',' << idx << ','
                << format_real(u) << '\n';
        }
    }
    return out.str();
}

// --- scalability -------------------------------------------------------------

PipelineTiming measure_pipeline(std::size_t n_candidates, std::uint64_t seed,
                                bool parallel) {
    SynthSpec spec;
    spec.n_candidates = n_candidates;
    spec.k_planted = 2;
    spec.n_rows = 100;
    spec.seed = seed;
    SynthInstance inst = synth_repository(spec);

    auto index = JoinIndex::build(inst.repo, 128, parallel);
    auto candidates = generate_candidates(inst.d_in, index, inst.repo, 0.6, 1);

    auto registry = ProfileRegistry::default_set();
    PipelineTiming t;
    t.n_candidates = candidates.size();

    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    ProfileContext ctx(inst.d_in, inst.repo, registry, inst.task->target_column(), seed);
    auto vectors = ctx.compute_batch(candidates, parallel);
    const auto t1 = clock::now();

    std::map<std::string, ProfileVector> profiles;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        ids.push_back(candidates[i].id);
        profiles.emplace(candidates[i].id, std::move(vectors[i]));
    }
    auto clusters = cluster_partition(ids, profiles, 0.05, seed, parallel);
    const auto t2 = clock::now();

    QualityState quality(profiles, registry.size(), 1e-3, parallel);
    const std::string* best = nullptr;
    double best_q = -1.0;
    for (const auto& id : ids) {
        const double q = quality.quality(id);
        if (q > best_q) {
            best_q = q;
            best = &id;
        }
    }
    (void)best;
    const auto t3 = clock::now();

    t.profile_seconds = std::chrono::duration<double>(t1 - t0).count();
    t.cluster_seconds = std::chrono::duration<double>(t2 - t1).count();
    t.score_seconds = std::chrono::duration<double>(t3 - t2).count();
    t.total_seconds = std::chrono::duration<double>(t3 - t0).count();
    t.clusters = clusters.cluster_count();
    return t;
}

double linear_fit_r2(const std::vector<PipelineTiming>& timings) {
    const std::size_t n = timings.size();
    if (n < 2) return 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (const auto& t : timings) {
        const double x = static_cast<double>(t.n_candidates);
        const double y = t.total_seconds;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    const double dn = static_cast<double>(n);
    const double cov = sxy - sx * sy / dn;
    const double vx = sxx - sx * sx / dn;
    const double vy = syy - sy * sy / dn;
    if (vx <= 0 || vy <= 0) return 0.0;
    return (cov * cov) / (vx * vy);
}

}  // namespace metam
