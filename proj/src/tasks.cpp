#include "metam/tasks.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "metam/errors.hpp"
#include "metam/repository.hpp"
#include "metam/stats.hpp"
#include "metam/trees.hpp"

namespace metam {

namespace fs = std::filesystem;

std::string task_kind_name(TaskKind k) {
    switch (k) {
        case TaskKind::Classification: return "classification";
        case TaskKind::Regression: return "regression";
        case TaskKind::WhatIf: return "whatif";
        case TaskKind::External: return "external";
    }
    return "unknown";
}

namespace {

// --- feature encoding -------------------------------------------------------

struct EncodedFeatures {
    std::vector<double> x;  // n rows x f features, NaN = missing
    std::size_t n = 0;
    std::size_t f = 0;
};

EncodedFeatures encode_features(const Table& t, std::size_t skip_column,
                                const std::vector<std::size_t>& rows) {
    EncodedFeatures out;
    out.n = rows.size();
    out.f = t.columns.size() > 0 ? t.columns.size() - 1 : 0;
    out.x.assign(out.n * out.f, std::nan(""));
    std::size_t feat = 0;
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
        if (j == skip_column) continue;
        const auto& col = t.columns[j];
        if (col.dtype == Dtype::Numeric) {
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const auto& c = col.values[rows[i]];
                if (!c) continue;
                if (auto v = parse_real(*c)) out.x[i * out.f + feat] = *v;
            }
        } else {
            std::unordered_map<std::string, double> codes;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const auto& c = col.values[rows[i]];
                if (!c) continue;
                auto [it, ins] = codes.emplace(*c, static_cast<double>(codes.size()));
                out.x[i * out.f + feat] = it->second;
            }
        }
        ++feat;
    }
    return out;
}

// impute train statistics (mean for numeric-ish, mode for coded categoricals)
void impute(EncodedFeatures& enc, const Table& t, std::size_t skip_column,
            std::size_t train_count) {
    std::size_t feat = 0;
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
        if (j == skip_column) continue;
        const bool numeric = t.columns[j].dtype == Dtype::Numeric;
        double fill = 0.0;
        if (numeric) {
            double s = 0.0;
            std::size_t m = 0;
            for (std::size_t i = 0; i < train_count; ++i) {
                const double v = enc.x[i * enc.f + feat];
                if (!std::isnan(v)) {
                    s += v;
                    ++m;
                }
            }
            fill = m ? s / static_cast<double>(m) : 0.0;
        } else {
            std::unordered_map<long long, std::size_t> counts;
            for (std::size_t i = 0; i < train_count; ++i) {
                const double v = enc.x[i * enc.f + feat];
                if (!std::isnan(v)) ++counts[static_cast<long long>(v)];
            }
            long long best = 0;
            std::size_t best_n = 0;
            for (auto [code, n] : counts) {
                if (n > best_n || (n == best_n && code < best)) {
                    best = code;
                    best_n = n;
                }
            }
            fill = static_cast<double>(best);
        }
        for (std::size_t i = 0; i < enc.n; ++i) {
            double& v = enc.x[i * enc.f + feat];
            if (std::isnan(v)) v = fill;
        }
        ++feat;
    }
}

std::vector<std::size_t> rows_with_target(const Table& t, std::size_t target) {
    std::vector<std::size_t> rows;
    rows.reserve(t.row_count);
    for (std::size_t r = 0; r < t.row_count; ++r) {
        if (t.columns[target].values[r].has_value()) rows.push_back(r);
    }
    return rows;
}

std::size_t require_column(const Table& t, const std::string& name) {
    auto idx = t.column_index(name);
    if (!idx) throw TaskFailure("target column '" + name + "' not found in " + t.id);
    return *idx;
}

// --- classification ---------------------------------------------------------

class ClassificationTask final : public UtilityTask {
public:
    ClassificationTask(std::string target, std::uint64_t seed, int n_trees, int depth)
        : target_(std::move(target)), seed_(seed) {
        params_.n_trees = n_trees;
        params_.max_depth = depth;
    }

    TaskKind kind() const override { return TaskKind::Classification; }
    std::optional<std::string> target_column() const override { return target_; }

    TaskResult evaluate(const Table& t) const override {
        const std::size_t tgt = require_column(t, target_);
        auto rows = rows_with_target(t, tgt);
        if (rows.size() < 20) return {0.0, "degenerate: fewer than 20 labeled rows"};

        // class codes by first appearance over the kept rows
        std::unordered_map<std::string, double> classes;
        std::vector<double> y;
        y.reserve(rows.size());
        for (auto r : rows) {
            auto [it, ins] =
                classes.emplace(*t.columns[tgt].values[r], static_cast<double>(classes.size()));
            y.push_back(it->second);
        }
        if (classes.size() < 2) return {0.0, "degenerate: single target class"};

        Rng rng = Rng(seed_).fork(fnv1a64("split"));
        std::vector<std::size_t> order(rows.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        const std::size_t n_train = std::max<std::size_t>(1, order.size() * 7 / 10);

        std::vector<std::size_t> perm_rows(order.size());
        std::vector<double> perm_y(order.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            perm_rows[i] = rows[order[i]];
            perm_y[i] = y[order[i]];
        }
        auto enc = encode_features(t, tgt, perm_rows);
        impute(enc, t, tgt, n_train);

        std::vector<double> train_x(enc.x.begin(), enc.x.begin() + n_train * enc.f);
        std::vector<double> train_y(perm_y.begin(), perm_y.begin() + n_train);
        BaggedTrees forest;
        forest.fit(train_x, n_train, enc.f, train_y, classes.size(), params_,
                   splitmix64(seed_ ^ 0xf07e57ULL));

        // macro F over classes present in the validation truth
        const std::size_t n_val = enc.n - n_train;
        std::vector<std::size_t> tp(classes.size(), 0), fp(classes.size(), 0),
            fn(classes.size(), 0);
        std::vector<bool> present(classes.size(), false);
        for (std::size_t i = 0; i < n_val; ++i) {
            const auto truth = static_cast<std::size_t>(perm_y[n_train + i]);
            const auto pred =
                static_cast<std::size_t>(forest.predict(&enc.x[(n_train + i) * enc.f]));
            present[truth] = true;
            if (pred == truth) {
                ++tp[truth];
            } else {
                ++fp[pred];
                ++fn[truth];
            }
        }
        double f_sum = 0.0;
        std::size_t n_present = 0;
        for (std::size_t c = 0; c < classes.size(); ++c) {
            if (!present[c]) continue;
            ++n_present;
            const double denom = 2.0 * tp[c] + fp[c] + fn[c];
            if (denom > 0) f_sum += 2.0 * tp[c] / denom;
        }
        const double macro_f = n_present ? f_sum / static_cast<double>(n_present) : 0.0;
        return {std::clamp(macro_f, 0.0, 1.0),
                "macro-f over " + std::to_string(n_val) + " validation rows, " +
                    std::to_string(classes.size()) + " classes"};
    }

private:
    std::string target_;
    std::uint64_t seed_;
    TreeEnsembleParams params_;
};

// --- regression --------------------------------------------------------------

class RegressionTask final : public UtilityTask {
public:
    RegressionTask(std::string target, std::uint64_t seed, int n_trees, int depth)
        : target_(std::move(target)), seed_(seed) {
        params_.n_trees = n_trees;
        params_.max_depth = depth;
    }

    TaskKind kind() const override { return TaskKind::Regression; }
    std::optional<std::string> target_column() const override { return target_; }

    TaskResult evaluate(const Table& t) const override {
        const std::size_t tgt = require_column(t, target_);
        std::vector<std::size_t> rows;
        std::vector<double> y;
        for (std::size_t r = 0; r < t.row_count; ++r) {
            const auto& c = t.columns[tgt].values[r];
            if (!c) continue;
            if (auto v = parse_real(*c)) {
                rows.push_back(r);
                y.push_back(*v);
            }
        }
        if (rows.size() < 20) return {0.0, "degenerate: fewer than 20 numeric targets"};

        Rng rng = Rng(seed_).fork(fnv1a64("split"));
        std::vector<std::size_t> order(rows.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        const std::size_t n_train = std::max<std::size_t>(1, order.size() * 7 / 10);

        std::vector<std::size_t> perm_rows(order.size());
        std::vector<double> perm_y(order.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            perm_rows[i] = rows[order[i]];
            perm_y[i] = y[order[i]];
        }

        double lo = perm_y[0], hi = perm_y[0];
        for (std::size_t i = 0; i < n_train; ++i) {
            lo = std::min(lo, perm_y[i]);
            hi = std::max(hi, perm_y[i]);
        }
        std::string note;
        if (hi <= lo) note = "degenerate: constant target on the train split";
        auto scale = [&](double v) { return hi > lo ? (v - lo) / (hi - lo) : 0.0; };
        std::vector<double> scaled(perm_y.size());
        for (std::size_t i = 0; i < perm_y.size(); ++i) scaled[i] = scale(perm_y[i]);

        auto enc = encode_features(t, tgt, perm_rows);
        impute(enc, t, tgt, n_train);
        std::vector<double> train_x(enc.x.begin(), enc.x.begin() + n_train * enc.f);
        std::vector<double> train_y(scaled.begin(), scaled.begin() + n_train);
        BaggedTrees forest;
        forest.fit(train_x, n_train, enc.f, train_y, 0, params_,
                   splitmix64(seed_ ^ 0x4e675ULL));

        double mae = 0.0;
        const std::size_t n_val = enc.n - n_train;
        for (std::size_t i = 0; i < n_val; ++i) {
            mae += std::abs(forest.predict(&enc.x[(n_train + i) * enc.f]) -
                            scaled[n_train + i]);
        }
        mae = n_val ? mae / static_cast<double>(n_val) : 0.0;
        if (note.empty()) note = "mae " + format_real(mae);
        return {std::clamp(1.0 - mae, 0.0, 1.0), note};
    }

private:
    std::string target_;
    std::uint64_t seed_;
    TreeEnsembleParams params_;
};

// --- what-if -----------------------------------------------------------------

class WhatIfTask final : public UtilityTask {
public:
    WhatIfTask(std::string update_column, std::set<std::string> ground_truth, double alpha)
        : update_(std::move(update_column)), truth_(std::move(ground_truth)), alpha_(alpha) {
        if (truth_.empty()) throw ConfigError("whatif task needs a nonempty ground truth");
    }

    TaskKind kind() const override { return TaskKind::WhatIf; }
    std::optional<std::string> target_column() const override { return update_; }

    TaskResult evaluate(const Table& t) const override {
        const std::size_t upd = require_column(t, update_);
        std::size_t found = 0;
        std::size_t declared = 0;
        for (std::size_t j = 0; j < t.columns.size(); ++j) {
            if (j == upd || !t.columns[j].name) continue;
            const double p = dependence_p_value(t.columns[upd], t.columns[j]);
            if (p <= alpha_) {
                ++declared;
                if (truth_.count(*t.columns[j].name)) ++found;
            }
        }
        const double utility =
            static_cast<double>(found) / static_cast<double>(truth_.size());
        return {std::clamp(utility, 0.0, 1.0),
                std::to_string(declared) + " columns declared affected"};
    }

private:
    std::string update_;
    std::set<std::string> truth_;
    double alpha_;

    static double dependence_p_value(const Column& a, const Column& b) {
        if (a.dtype == Dtype::Numeric && b.dtype == Dtype::Numeric) {
            double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
            std::size_t m = 0;
            const std::size_t n = std::min(a.values.size(), b.values.size());
            for (std::size_t i = 0; i < n; ++i) {
                if (!a.values[i] || !b.values[i]) continue;
                auto x = parse_real(*a.values[i]);
                auto y = parse_real(*b.values[i]);
                if (!x || !y) continue;
                ++m;
                sx += *x;
                sy += *y;
                sxx += *x * *x;
                syy += *y * *y;
                sxy += *x * *y;
            }
            if (m < 3) return 1.0;
            const double dm = static_cast<double>(m);
            const double vx = sxx - sx * sx / dm;
            const double vy = syy - sy * sy / dm;
            if (vx <= 0 || vy <= 0) return 1.0;
            const double r = (sxy - sx * sy / dm) / std::sqrt(vx * vy);
            return pearson_p_value(r, m);
        }
        return chi_square_bins(a, b);
    }

    static double chi_square_bins(const Column& a, const Column& b) {
        const auto ba = bin_column(a);
        const auto bb = bin_column(b);
        const std::size_t n = std::min(ba.second.size(), bb.second.size());
        std::unordered_map<long long, double> counts;
        std::unordered_map<int, double> ra, rb;
        double m = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (ba.second[i] < 0 || bb.second[i] < 0) continue;
            m += 1;
            counts[static_cast<long long>(ba.second[i]) * 10007LL + bb.second[i]] += 1;
            ra[ba.second[i]] += 1;
            rb[bb.second[i]] += 1;
        }
        if (m < 5 || ra.size() < 2 || rb.size() < 2) return 1.0;
        double chi2 = 0.0;
        for (auto& [ka, ca] : ra) {
            for (auto& [kb, cb] : rb) {
                const double expected = ca * cb / m;
                if (expected <= 0) continue;
                auto it = counts.find(static_cast<long long>(ka) * 10007LL + kb);
                const double observed = it == counts.end() ? 0.0 : it->second;
                chi2 += (observed - expected) * (observed - expected) / expected;
            }
        }
        const double df = static_cast<double>((ra.size() - 1) * (rb.size() - 1));
        return chi_square_p_value(chi2, df);
    }

    // numeric -> 10 equal-width bins, categorical -> category codes, null -> -1
    static std::pair<int, std::vector<int>> bin_column(const Column& col) {
        std::vector<int> out(col.values.size(), -1);
        if (col.dtype == Dtype::Numeric) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            std::vector<double> vals(col.values.size(), std::nan(""));
            for (std::size_t i = 0; i < col.values.size(); ++i) {
                if (!col.values[i]) continue;
                if (auto v = parse_real(*col.values[i])) {
                    vals[i] = *v;
                    lo = std::min(lo, *v);
                    hi = std::max(hi, *v);
                }
            }
            if (!(hi > lo)) return {1, out};
            for (std::size_t i = 0; i < vals.size(); ++i) {
                if (std::isnan(vals[i])) continue;
                out[i] = std::clamp(static_cast<int>((vals[i] - lo) / (hi - lo) * 10), 0, 9);
            }
            return {10, out};
        }
        std::unordered_map<std::string, int> codes;
        for (std::size_t i = 0; i < col.values.size(); ++i) {
            if (!col.values[i]) continue;
            auto [it, ins] = codes.emplace(*col.values[i], static_cast<int>(codes.size()));
            out[i] = it->second;
        }
        return {static_cast<int>(codes.size()), out};
    }
};

// --- external process protocol ------------------------------------------------

class ExternalTask final : public UtilityTask {
public:
    ExternalTask(std::string command, double timeout_seconds)
        : command_(std::move(command)), timeout_(timeout_seconds) {}

    TaskKind kind() const override { return TaskKind::External; }

    TaskResult evaluate(const Table& t) const override {
        const fs::path dir = fs::temp_directory_path();
        const fs::path csv =
            dir / ("metam-task-" + std::to_string(::getpid()) + "-" +
                   std::to_string(counter_++) + ".csv");
        write_table_file(t, csv);
        std::string output;
        int exit_code = 0;
        try {
            output = run_with_timeout(command_ + " '" + csv.string() + "'", timeout_,
                                      &exit_code);
        } catch (...) {
            fs::remove(csv);
            throw;
        }
        fs::remove(csv);
        if (exit_code != 0) {
            throw TaskFailure("external task exited with code " + std::to_string(exit_code));
        }
        // last non-empty stdout line carries the utility
        std::string last;
        std::string cur;
        for (char c : output + "\n") {
            if (c == '\n') {
                if (!trim(cur).empty()) last = std::string(trim(cur));
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        auto v = parse_real(last);
        if (!v) throw TaskFailure("external task output not a number: '" + last + "'");
        if (*v < 0.0 || *v > 1.0) {
            throw TaskFailure("external task utility out of range: " + last);
        }
        return {*v, "external"};
    }

private:
    std::string command_;
    double timeout_;
    mutable long counter_ = 0;

    static std::string run_with_timeout(const std::string& cmd, double timeout_s,
                                        int* exit_code) {
        int fds[2];
        if (pipe(fds) != 0) throw TaskFailure("pipe failed");
        const pid_t pid = fork();
        if (pid < 0) {
            close(fds[0]);
            close(fds[1]);
            throw TaskFailure("fork failed");
        }
        if (pid == 0) {
            dup2(fds[1], STDOUT_FILENO);
            close(fds[0]);
            close(fds[1]);
            execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(fds[1]);
        std::string output;
        const auto deadline =
            std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
        char buf[4096];
        bool timed_out = false;
        for (;;) {
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  deadline - std::chrono::steady_clock::now())
                                  .count();
            if (left <= 0) {
                timed_out = true;
                break;
            }
            struct pollfd pfd{fds[0], POLLIN, 0};
            const int pr = poll(&pfd, 1, static_cast<int>(std::min<long long>(left, 200)));
            if (pr > 0) {
                const ssize_t got = read(fds[0], buf, sizeof(buf));
                if (got <= 0) break;  // eof
                output.append(buf, static_cast<std::size_t>(got));
            }
        }
        close(fds[0]);
        if (timed_out) {
            kill(pid, SIGKILL);
            waitpid(pid, nullptr, 0);
            throw TaskFailure("external task timed out");
        }
        int status = 0;
        waitpid(pid, &status, 0);
        *exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128;
        return output;
    }
};

}  // namespace

std::unique_ptr<UtilityTask> make_classification_task(std::string target,
                                                      std::uint64_t seed, int n_trees,
                                                      int depth) {
    return std::make_unique<ClassificationTask>(std::move(target), seed, n_trees, depth);
}

std::unique_ptr<UtilityTask> make_regression_task(std::string target, std::uint64_t seed,
                                                  int n_trees, int depth) {
    return std::make_unique<RegressionTask>(std::move(target), seed, n_trees, depth);
}

std::unique_ptr<UtilityTask> make_whatif_task(std::string update_column,
                                              std::set<std::string> ground_truth,
                                              double alpha) {
    return std::make_unique<WhatIfTask>(std::move(update_column), std::move(ground_truth),
                                        alpha);
}

std::unique_ptr<UtilityTask> make_external_task(std::string command,
                                                double timeout_seconds) {
    return std::make_unique<ExternalTask>(std::move(command), timeout_seconds);
}

std::unique_ptr<UtilityTask> load_task_config(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid task config: ") + e.what());
    }
    const std::string kind = j.value("kind", "");
    const std::uint64_t seed = j.value("seed", 0ULL);
    if (kind == "classification") {
        return make_classification_task(j.at("target").get<std::string>(), seed,
                                        j.value("trees", 16), j.value("depth", 6));
    }
    if (kind == "regression") {
        return make_regression_task(j.at("target").get<std::string>(), seed,
                                    j.value("trees", 16), j.value("depth", 6));
    }
    if (kind == "whatif") {
        std::set<std::string> truth;
        for (const auto& g : j.at("ground_truth")) truth.insert(g.get<std::string>());
        return make_whatif_task(j.at("target").get<std::string>(), std::move(truth),
                                j.value("alpha", 0.05));
    }
    if (kind == "external") {
        return make_external_task(j.at("command").get<std::string>(),
                                  j.value("timeout", 120.0));
    }
    throw ConfigError("unknown task kind: '" + kind + "'");
}

std::unique_ptr<UtilityTask> load_task_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read task config " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load_task_config(text);
}

double checked_utility(const UtilityTask& task, const Table& table, std::string* details) {
    const TaskResult r = task.evaluate(table);
    if (!std::isfinite(r.utility) || r.utility < 0.0 || r.utility > 1.0) {
        throw TaskFailure("task produced an out-of-range utility");
    }
    if (details) *details = r.details;
    return r.utility;
}

}  // namespace metam
